use serde::Serialize;

use super::{loglog_slope, run_capped, ExperimentConfig, Prepared};
use crate::dense::{ansatz_unitary, epsilon, trotter_step, TrotterOrder};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::optimize::{OptimizationResult, OptimizerSettings};
use crate::sheet::ParamSheet;

/// A single pre-optimized step of duration `t` repeated `K` times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatRecord {
    /// Single-step `√(2n)·t`.
    pub scaled_time: f64,
    pub t: f64,
    pub k: usize,
    /// `√(2n)·K·t`.
    pub scaled_horizon: f64,
    /// `C(θ^K)²`, evaluated on the `KR`-layer sheet.
    pub c_sq: f64,
    pub c_sq_trotter: f64,
    /// `E(θ^K)`.
    pub e: f64,
    /// `K·E(θ) + K(K−1)/2·Λ(θ)`.
    pub e_bound: f64,
    pub eps_var: Option<f64>,
    /// First-order Trotter with `KR` steps of duration `t/R`.
    pub eps_trotter: Option<f64>,
}

/// Log-log slopes against `K` for one single-step time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatFit {
    pub scaled_time: f64,
    pub slope_c_sq: Option<f64>,
    pub slope_c_sq_trotter: Option<f64>,
    /// Only rows with `√(2n)·K·t` below the fit horizon enter the exact
    /// error slopes.
    pub slope_eps_var_sq: Option<f64>,
    pub slope_eps_trotter_sq: Option<f64>,
    pub exact_fit_points: usize,
}

#[derive(Clone, Debug)]
pub struct RepeatOutput {
    pub records: Vec<RepeatRecord>,
    pub fits: Vec<RepeatFit>,
    pub optimum: OptimizationResult,
    pub perturbative_only: bool,
}

pub fn repeat_scaling(config: &ExperimentConfig) -> Result<RepeatOutput> {
    config.validate()?;
    let cfg = config.seeded();
    let prep = Prepared::new(&cfg.model)?;
    repeat_prepared(
        &prep,
        cfg.layers,
        &cfg.repeat.times,
        cfg.repeat.k_max,
        cfg.repeat.fit_horizon,
        &cfg.optimizer,
        cfg.execution,
        cfg.memory_budget_bytes(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn repeat_prepared(
    prep: &Prepared,
    layers: usize,
    times: &[f64],
    k_max: usize,
    fit_horizon: f64,
    settings: &OptimizerSettings,
    exec: Execution,
    budget_bytes: u64,
) -> Result<RepeatOutput> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("k_max must be at least 1".into()));
    }
    let optimum = prep.unit_optimum(layers, settings)?;
    let per_time = run_capped(exec, prep.threads(budget_bytes), || {
        exec.try_map(times, |&s| repeat_at(prep, &optimum, layers, s, k_max))
    })?;
    let fits = per_time.iter().zip(times).map(|(rows, &s)| fit(rows, s, fit_horizon)).collect();
    Ok(RepeatOutput {
        records: per_time.into_iter().flatten().collect(),
        fits,
        optimum,
        perturbative_only: prep.oracle.is_none(),
    })
}

fn repeat_at(
    prep: &Prepared,
    optimum: &OptimizationResult,
    layers: usize,
    scaled_time: f64,
    k_max: usize,
) -> Result<Vec<RepeatRecord>> {
    let t = prep.to_time(scaled_time);
    let model = &prep.model;
    let sheet = optimum.sheet_scaled(t);
    let trotter = ParamSheet::trotter(layers, t, &model.coefficients())?;
    let (e1, lambda) = (prep.poly.error_term(&sheet)?, prep.poly.lambda_rest(&sheet)?);
    let steps = match &prep.oracle {
        Some(_) => Some((
            ansatz_unitary(model, &sheet)?,
            trotter_step(model, t / layers as f64, TrotterOrder::First)?.pow(layers),
        )),
        None => None,
    };
    let mut powers = steps.clone();
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let rep = sheet.repeat_sheet(k)?;
        let kf = k as f64;
        let mut row = RepeatRecord {
            scaled_time,
            t,
            k,
            scaled_horizon: scaled_time * kf,
            c_sq: prep.poly.cost_sq(&rep)?,
            c_sq_trotter: prep.poly.cost_sq(&trotter.repeat_sheet(k)?)?,
            e: prep.poly.error_term(&rep)?,
            e_bound: kf * e1 + 0.5 * kf * (kf - 1.0) * lambda,
            eps_var: None,
            eps_trotter: None,
        };
        if let (Some(oracle), Some((uv, ut)), Some((sv, st))) = (&prep.oracle, &mut powers, &steps) {
            if k > 1 {
                *uv = sv.mul(uv);
                *ut = st.mul(ut);
            }
            let exact = oracle.at(kf * t);
            row.eps_var = Some(epsilon(&exact, uv)?);
            row.eps_trotter = Some(epsilon(&exact, ut)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn fit(rows: &[RepeatRecord], scaled_time: f64, horizon: f64) -> RepeatFit {
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let col = |f: &dyn Fn(&RepeatRecord) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let inside: Vec<&RepeatRecord> = rows.iter().filter(|r| r.scaled_horizon < horizon).collect();
    let ks_in: Vec<f64> = inside.iter().map(|r| r.k as f64).collect();
    let sq = |f: &dyn Fn(&RepeatRecord) -> Option<f64>| -> Option<Vec<f64>> {
        inside.iter().map(|r| f(r).map(|v| v * v)).collect()
    };
    RepeatFit {
        scaled_time,
        slope_c_sq: loglog_slope(&ks, &col(&|r| r.c_sq)),
        slope_c_sq_trotter: loglog_slope(&ks, &col(&|r| r.c_sq_trotter)),
        slope_eps_var_sq: sq(&|r| r.eps_var).and_then(|v| loglog_slope(&ks_in, &v)),
        slope_eps_trotter_sq: sq(&|r| r.eps_trotter).and_then(|v| loglog_slope(&ks_in, &v)),
        exact_fit_points: inside.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::repeated_epsilon;
    use crate::experiments::config::{RepeatConfig, Spacing, TimeGrid};
    use crate::experiments::sweep_time;
    use crate::model::{Connectivity, CouplingSpec};

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            model: CouplingSpec::xy(Connectivity::Full { n: 3 }, 2),
            repeat: RepeatConfig {
                times: vec![0.05, 0.5],
                k_max: 6,
                fit_horizon: 1.5,
            },
            optimizer: OptimizerSettings {
                restarts: 1,
                max_iterations: 300,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn first_row_matches_sweep() {
        let cfg = cfg();
        let rep = repeat_scaling(&cfg).unwrap();
        let sweep = sweep_time(&ExperimentConfig {
            grid: TimeGrid {
                min: 0.05,
                max: 0.5,
                count: 2,
                spacing: Spacing::Log,
            },
            ..cfg.clone()
        })
        .unwrap();
        for (i, s) in sweep.records.iter().enumerate() {
            let r = &rep.records[i * 6];
            assert_eq!(r.k, 1);
            assert!((r.c_sq - s.c_opt * s.c_opt).abs() <= 1e-14 * r.c_sq.max(1e-300));
            assert_eq!(r.e, s.e_opt);
            assert_eq!(r.eps_var, s.eps_var);
            assert!((r.eps_trotter.unwrap() - s.eps_trotter[0].unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn powers_match_direct_and_slope_is_two() {
        let cfg = cfg();
        let prep = Prepared::new(&cfg.model).unwrap();
        let rep = repeat_scaling(&cfg).unwrap();
        let r = &rep.records[4];
        let sheet = rep.optimum.sheet_scaled(r.t);
        let direct = repeated_epsilon(&prep.model, &sheet, r.k).unwrap();
        assert!((direct - r.eps_var.unwrap()).abs() < 1e-12);
        for f in &rep.fits {
            assert!((f.slope_c_sq_trotter.unwrap() - 2.0).abs() < 1e-9);
        }
        for row in &rep.records {
            assert!(row.e <= row.e_bound * (1.0 + 1e-10) + 1e-15);
        }
    }
}
