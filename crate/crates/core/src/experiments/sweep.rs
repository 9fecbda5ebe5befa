use serde::Serialize;

use super::{ratio, run_capped, ExperimentConfig, Prepared};
use crate::dense::{ansatz_unitary, epsilon, trotter_step, TrotterOrder};
use crate::error::Result;
use crate::exec::Execution;
use crate::optimize::{OptimizationResult, OptimizerSettings};
use crate::sheet::ParamSheet;

/// One grid point of a time sweep. `ε` columns are `None` in
/// perturbative-only mode or for orders that were not requested.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub scaled_time: f64,
    pub t: f64,
    pub c_trotter: f64,
    pub c_opt: f64,
    pub e_trotter: f64,
    pub e_opt: f64,
    pub eps_var: Option<f64>,
    /// `ε` of `R` Trotter steps of duration `t/R` at `q = 1, 2, 4`.
    pub eps_trotter: [Option<f64>; 3],
    /// `ε_T(q=1) / ε_var`.
    pub r_eps: Option<f64>,
    /// `ε_T(q=1) / E_opt`.
    pub r_e: Option<f64>,
    /// `ε_T(q=1) / (C_opt + E_opt)`, a lower bound on `R_ε` up to higher
    /// orders.
    pub r_bound: Option<f64>,
}

impl SweepRecord {
    pub fn eps_trotter_q(&self, order: TrotterOrder) -> Option<f64> {
        self.eps_trotter[order_slot(order)]
    }
}

pub(crate) fn order_slot(order: TrotterOrder) -> usize {
    match order {
        TrotterOrder::First => 0,
        TrotterOrder::Second => 1,
        TrotterOrder::Fourth => 2,
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    /// The optimization at unit time that every grid point rescales.
    pub optimum: OptimizationResult,
    pub layers: usize,
    pub perturbative_only: bool,
}

pub fn sweep_time(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let cfg = config.seeded();
    let prep = Prepared::new(&cfg.model)?;
    sweep_prepared(
        &prep,
        cfg.layers,
        &cfg.grid.points(),
        &cfg.trotter_orders()?,
        &cfg.optimizer,
        cfg.execution,
        cfg.memory_budget_bytes(),
    )
}

/// Sweep over `points` (in `√(2n)·t` units) for an already built model.
pub fn sweep_prepared(
    prep: &Prepared,
    layers: usize,
    points: &[f64],
    orders: &[TrotterOrder],
    settings: &OptimizerSettings,
    exec: Execution,
    budget_bytes: u64,
) -> Result<SweepOutput> {
    let optimum = prep.unit_optimum(layers, settings)?;
    let records = run_capped(exec, prep.threads(budget_bytes), || {
        exec.try_map(points, |&s| sweep_point(prep, &optimum, layers, s, orders))
    })?;
    Ok(SweepOutput {
        records,
        optimum,
        layers,
        perturbative_only: prep.oracle.is_none(),
    })
}

fn sweep_point(
    prep: &Prepared,
    optimum: &OptimizationResult,
    layers: usize,
    scaled_time: f64,
    orders: &[TrotterOrder],
) -> Result<SweepRecord> {
    let t = prep.to_time(scaled_time);
    let model = &prep.model;
    let best = optimum.sheet_scaled(t);
    let trotter = ParamSheet::trotter(layers, t, &model.coefficients())?;
    let (c_trotter, c_opt) = (prep.poly.cost(&trotter)?, prep.poly.cost(&best)?);
    let (e_trotter, e_opt) = (prep.poly.error_term(&trotter)?, prep.poly.error_term(&best)?);
    let mut rec = SweepRecord {
        scaled_time,
        t,
        c_trotter,
        c_opt,
        e_trotter,
        e_opt,
        eps_var: None,
        eps_trotter: [None; 3],
        r_eps: None,
        r_e: None,
        r_bound: None,
    };
    let Some(oracle) = &prep.oracle else {
        return Ok(rec);
    };
    let exact = oracle.at(t);
    let eps_var = epsilon(&exact, &ansatz_unitary(model, &best)?)?;
    rec.eps_var = Some(eps_var);
    for &order in orders {
        let approx = match order {
            // exponential by exponential, identical to the ansatz at θ_T
            TrotterOrder::First => ansatz_unitary(model, &trotter)?,
            _ => trotter_step(model, t / layers as f64, order)?.pow(layers),
        };
        rec.eps_trotter[order_slot(order)] = Some(epsilon(&exact, &approx)?);
    }
    if let Some(e1) = rec.eps_trotter[0] {
        rec.r_eps = Some(ratio(e1, eps_var));
        rec.r_e = Some(ratio(e1, e_opt));
        rec.r_bound = Some(ratio(e1, c_opt + e_opt));
    }
    Ok(rec)
}
