//! Largest reachable time under a fixed exponential budget.
//!
//! The budget for `K` repetitions of an `R`-layer step is `G = K·R·M`
//! exponentials. A Trotter formula of order `q` gets `N = ⌊G / g_q⌋` steps,
//! where `g_q` is its per-step count ([`TrotterOrder::exponentials_per_step`]);
//! with `N = 0` the method has no data point. Every method is evaluated on
//! the same horizon `T = K·t` with `t` on a grid of step `Δ` in `√(2n)·t`
//! units.
//!
//! The search gallops upward from the first grid point and then bisects the
//! last bracket, caching every evaluation. Thresholds are processed in
//! increasing order and each search starts from the previous frontier, so
//! `T_max` is non-decreasing in the threshold.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::{ratio, run_capped, ExperimentConfig, MaxTimeConfig, Prepared};
use crate::dense::{ansatz_unitary, epsilon, trotter_step, DenseUnitary, TrotterOrder};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::optimize::{OptimizationResult, OptimizerSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Variational,
    Trotter(TrotterOrder),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Variational => write!(f, "var"),
            Method::Trotter(o) => write!(f, "q{}", o.q()),
        }
    }
}

/// One method's frontier for a given threshold and `K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodFrontier {
    pub method: Method,
    /// Repetitions (variational) or Trotter steps within the budget.
    pub steps: usize,
    pub exponentials: usize,
    /// Index of `t_max` on the grid; 0 when nothing is feasible.
    pub grid_index: usize,
    pub scaled_t_max: f64,
    pub t_max: f64,
    /// `K · t_max`.
    pub horizon: f64,
    /// Error at `t_max`; `None` when infeasible.
    pub error_at: Option<f64>,
    /// Error at the next grid point; `None` when `t_max` is the last one.
    pub error_next: Option<f64>,
    pub feasible: bool,
    /// The error never crossed the threshold on the grid.
    pub capped: bool,
}

impl MethodFrontier {
    /// `error_at ≤ ε̂ < error_next`, with the open ends accepted.
    pub fn brackets(&self, threshold: f64) -> bool {
        let below = self.error_at.is_none_or(|e| e <= threshold);
        let above = self.error_next.is_none_or(|e| e > threshold);
        below && above
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxTimeRecord {
    pub threshold: f64,
    pub k: usize,
    pub frontiers: Vec<MethodFrontier>,
    /// Reach of the variational sequence relative to first-order Trotter,
    /// `T_max(var) / T_max(q=1)`; above 1 when the variational step goes
    /// further. `None` when first-order Trotter has no feasible point.
    pub reach_ratio: Option<f64>,
}

impl MaxTimeRecord {
    pub fn frontier(&self, method: Method) -> Option<&MethodFrontier> {
        self.frontiers.iter().find(|f| f.method == method)
    }
}

pub fn max_time_search(config: &ExperimentConfig) -> Result<Vec<MaxTimeRecord>> {
    config.validate()?;
    let cfg = config.seeded();
    let prep = Prepared::new(&cfg.model)?;
    let mut methods = vec![Method::Variational];
    methods.extend(cfg.trotter_orders()?.into_iter().map(Method::Trotter));
    max_time_prepared(
        &prep,
        cfg.layers,
        &cfg.maxtime,
        &methods,
        &cfg.optimizer,
        cfg.execution,
        cfg.memory_budget_bytes(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn max_time_prepared(
    prep: &Prepared,
    layers: usize,
    grid: &MaxTimeConfig,
    methods: &[Method],
    settings: &OptimizerSettings,
    exec: Execution,
    budget_bytes: u64,
) -> Result<Vec<MaxTimeRecord>> {
    prep.oracle()?;
    if grid.k_values.contains(&0) || !(grid.step > 0.0) || grid.grid_len() == 0 {
        return Err(Error::InvalidConfig("maxtime needs K ≥ 1 and a nonempty grid".into()));
    }
    let mut thresholds = grid.thresholds.clone();
    thresholds.sort_by(f64::total_cmp);
    let optimum = prep.unit_optimum(layers, settings)?;
    let items: Vec<(Method, usize)> = grid
        .k_values
        .iter()
        .flat_map(|&k| methods.iter().map(move |&m| (m, k)))
        .collect();
    let frontiers = run_capped(exec, prep.threads(budget_bytes), || {
        exec.try_map(&items, |&(method, k)| {
            let mut search = Search {
                prep,
                optimum: &optimum,
                layers,
                grid,
                method,
                k,
                memo: HashMap::new(),
            };
            search.frontiers(&thresholds)
        })
    })?;
    let mut records = Vec::new();
    for (ti, &threshold) in thresholds.iter().enumerate() {
        for (ki, &k) in grid.k_values.iter().enumerate() {
            let fr: Vec<MethodFrontier> = (0..methods.len())
                .map(|mi| frontiers[ki * methods.len() + mi][ti].clone())
                .collect();
            let horizon = |m: Method| fr.iter().find(|f| f.method == m).map(|f| f.horizon);
            let reach_ratio = match (horizon(Method::Variational), horizon(Method::Trotter(TrotterOrder::First))) {
                (Some(tv), Some(tt)) if tt > 0.0 => Some(ratio(tv, tt)),
                _ => None,
            };
            records.push(MaxTimeRecord {
                threshold,
                k,
                frontiers: fr,
                reach_ratio,
            });
        }
    }
    Ok(records)
}

struct Search<'a> {
    prep: &'a Prepared,
    optimum: &'a OptimizationResult,
    layers: usize,
    grid: &'a MaxTimeConfig,
    method: Method,
    k: usize,
    memo: HashMap<usize, f64>,
}

impl Search<'_> {
    /// Repetitions or steps, and the exponentials they use.
    fn budget(&self) -> (usize, usize) {
        let m = self.prep.model.len();
        let g = self.k * self.layers * m;
        match self.method {
            Method::Variational => (self.k, g),
            Method::Trotter(order) => {
                let per = order.exponentials_per_step(m);
                let steps = g / per;
                (steps, steps * per)
            }
        }
    }

    fn time(&self, index: usize) -> f64 {
        self.prep.to_time(index as f64 * self.grid.step)
    }

    fn error(&mut self, index: usize) -> Result<f64> {
        if let Some(&e) = self.memo.get(&index) {
            return Ok(e);
        }
        let t = self.time(index);
        let horizon = self.k as f64 * t;
        let model = &self.prep.model;
        let (steps, _) = self.budget();
        let approx: DenseUnitary = match self.method {
            Method::Variational => ansatz_unitary(model, &self.optimum.sheet_scaled(t))?.pow(self.k),
            Method::Trotter(order) => trotter_step(model, horizon / steps as f64, order)?.pow(steps),
        };
        let e = epsilon(&self.prep.oracle()?.at(horizon), &approx)?;
        self.memo.insert(index, e);
        Ok(e)
    }

    fn frontiers(&mut self, thresholds: &[f64]) -> Result<Vec<MethodFrontier>> {
        let (steps, exponentials) = self.budget();
        let mut out = Vec::with_capacity(thresholds.len());
        let mut known = 0;
        for &eps in thresholds {
            let index = if steps == 0 { 0 } else { self.largest_below(eps, known)? };
            known = index;
            let n = self.grid.grid_len();
            let error_at = if index > 0 { Some(self.error(index)?) } else { None };
            let error_next = if steps == 0 || index == n {
                None
            } else {
                Some(self.error(index + 1)?)
            };
            let t = self.time(index);
            out.push(MethodFrontier {
                method: self.method,
                steps,
                exponentials,
                grid_index: index,
                scaled_t_max: index as f64 * self.grid.step,
                t_max: t,
                horizon: self.k as f64 * t,
                error_at,
                error_next,
                feasible: index > 0,
                capped: index == n,
            });
        }
        Ok(out)
    }

    /// Largest grid index `i` with `err(i) ≤ eps < err(i + 1)` reached from
    /// `lo`, a point already known to satisfy the threshold (0 if none).
    fn largest_below(&mut self, eps: f64, mut lo: usize) -> Result<usize> {
        let n = self.grid.grid_len();
        if lo == 0 {
            if !(self.error(1)? <= eps) {
                return Ok(0);
            }
            lo = 1;
        }
        let mut stride = 1;
        let mut hi;
        loop {
            if lo == n {
                return Ok(n);
            }
            let cand = (lo + stride).min(n);
            if self.error(cand)? <= eps {
                lo = cand;
                stride *= 2;
            } else {
                hi = cand;
                break;
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.error(mid)? <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}
