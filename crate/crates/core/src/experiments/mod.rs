//! Experiment drivers: time sweeps, repetition scaling, maximal-time
//! frontiers and the TFIM and layer-count variants, plus their CSV and manifest writers.
//!
//! Every driver works in `√(2n)·t` units. The optimum of `C²` at time `t` is
//! the unit-time optimum with all angles scaled by `t` (the cost is
//! homogeneous of degree four in `(θ, t)`), so each driver solves once at
//! `t = 1` and rescales.

pub mod appendix;
pub mod config;
pub mod maxtime;
pub mod output;
pub mod repeat;
pub mod sweep;

pub use appendix::{run_appendix_variants, AppendixOutput};
pub use config::{ExperimentConfig, MaxTimeConfig, RepeatConfig, Spacing, TimeGrid};
pub use maxtime::{max_time_search, Method, MethodFrontier, MaxTimeRecord};
pub use repeat::{repeat_scaling, RepeatFit, RepeatOutput, RepeatRecord};
pub use sweep::{sweep_time, SweepOutput, SweepRecord};

use crate::cost::CostPolynomial;
use crate::dense::SpectralPropagator;
use crate::error::{Error, Result};
use crate::exec::{threads_for_budget, Execution};
use crate::model::{CouplingSpec, HamiltonianModel};
use crate::optimize::{minimize, OptimizationResult, OptimizerSettings};
use crate::pauli::DENSE_LIMIT;

/// A built model with its compiled cost and, when small enough, its
/// spectral propagator.
pub struct Prepared {
    pub model: HamiltonianModel,
    pub poly: CostPolynomial,
    pub oracle: Option<SpectralPropagator>,
}

impl Prepared {
    pub fn new(spec: &CouplingSpec) -> Result<Self> {
        let model = spec.build()?;
        Self::from_model(model)
    }

    pub fn from_model(model: HamiltonianModel) -> Result<Self> {
        let poly = CostPolynomial::compile(&model, true)?;
        let oracle = if model.n() <= DENSE_LIMIT {
            Some(SpectralPropagator::new(&model)?)
        } else {
            None
        };
        Ok(Self { model, poly, oracle })
    }

    /// `√(2n)`.
    pub fn time_scale(&self) -> f64 {
        (2.0 * self.model.n() as f64).sqrt()
    }

    pub fn to_time(&self, scaled: f64) -> f64 {
        scaled / self.time_scale()
    }

    pub fn oracle(&self) -> Result<&SpectralPropagator> {
        self.oracle.as_ref().ok_or_else(|| {
            Error::Capacity(format!(
                "{} qubits exceed the dense limit of {DENSE_LIMIT}",
                self.model.n()
            ))
        })
    }

    pub fn unit_optimum(&self, layers: usize, settings: &OptimizerSettings) -> Result<OptimizationResult> {
        minimize(&self.poly, &self.model, 1.0, layers, settings)
    }

    /// Worker cap so that concurrent dense evaluations stay within the
    /// budget. A task holds roughly six `2^n × 2^n` complex matrices.
    pub fn threads(&self, budget_bytes: u64) -> usize {
        let dim = 1u64 << self.model.n().min(DENSE_LIMIT);
        threads_for_budget(budget_bytes, 6 * 16 * dim * dim)
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// `a / b`, with equal values giving exactly 1 (so a commuting model reports
/// a unit ratio even when both errors vanish).
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

pub(crate) fn run_capped<R: Send>(exec: Execution, threads: usize, f: impl FnOnce() -> R + Send) -> R {
    exec.install(Some(threads), f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes() {
        let xs: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn ratios() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert_eq!(ratio(2.0, 4.0), 0.5);
        assert!(ratio(1.0, 0.0).is_infinite());
    }
}
