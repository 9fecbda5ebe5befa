//! CSV tables and the JSON run manifest.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64`, so a ratio recomputed from its row's columns is bit-identical
//! to the stored one. Absent values are empty cells.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::maxtime::{MaxTimeRecord, Method};
use super::repeat::{RepeatFit, RepeatRecord};
use super::sweep::SweepRecord;
use super::ExperimentConfig;
use crate::dense::TrotterOrder;
use crate::error::Result;

pub const OUTPUT_DIR_ENV: &str = "TROTTEROPT_OUTPUT_DIR";

pub const GATE_CONVENTION: &str = "budget G = K*R*M exponentials for K repetitions of an R-layer step over M \
     terms; a Trotter formula of order q gets floor(G/g_q) steps with g_1 = M, g_2 = 2M-1 and \
     g_4 = 5(2M-1) (the middle exponentials of adjacent symmetric stages are not merged across steps)";

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_header() -> Vec<String> {
    [
        "scaled_time",
        "t",
        "c_trotter",
        "c_opt",
        "e_trotter",
        "e_opt",
        "eps_var",
        "eps_trotter_q1",
        "eps_trotter_q2",
        "eps_trotter_q4",
        "r_eps",
        "r_e",
        "r_bound",
    ]
    .map(String::from)
    .to_vec()
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row: Vec<String> = [r.scaled_time, r.t, r.c_trotter, r.c_opt, r.e_trotter, r.e_opt]
                .into_iter()
                .map(fmt_f)
                .collect();
            row.push(opt(r.eps_var));
            row.extend(r.eps_trotter.iter().map(|&e| opt(e)));
            row.extend([r.r_eps, r.r_e, r.r_bound].into_iter().map(opt));
            row
        })
        .collect();
    write_rows(path, &sweep_header(), &rows)
}

pub fn write_repeat_csv(path: &Path, records: &[RepeatRecord]) -> Result<()> {
    let header = [
        "scaled_time",
        "t",
        "k",
        "scaled_horizon",
        "c_sq",
        "c_sq_trotter",
        "e",
        "e_bound",
        "eps_var",
        "eps_trotter",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_f(r.scaled_time),
                fmt_f(r.t),
                r.k.to_string(),
                fmt_f(r.scaled_horizon),
                fmt_f(r.c_sq),
                fmt_f(r.c_sq_trotter),
                fmt_f(r.e),
                fmt_f(r.e_bound),
                opt(r.eps_var),
                opt(r.eps_trotter),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_repeat_fits_csv(path: &Path, fits: &[RepeatFit]) -> Result<()> {
    let header = [
        "scaled_time",
        "slope_c_sq",
        "slope_c_sq_trotter",
        "slope_eps_var_sq",
        "slope_eps_trotter_sq",
        "exact_fit_points",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|f| {
            vec![
                fmt_f(f.scaled_time),
                opt(f.slope_c_sq),
                opt(f.slope_c_sq_trotter),
                opt(f.slope_eps_var_sq),
                opt(f.slope_eps_trotter_sq),
                f.exact_fit_points.to_string(),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

const FRONTIER_FIELDS: [&str; 9] = [
    "steps",
    "grid_index",
    "scaled_t_max",
    "t_max",
    "T_max",
    "err_at",
    "err_next",
    "feasible",
    "capped",
];

/// One row per threshold and `K`, with a block of columns per method.
pub fn write_maxtime_csv(path: &Path, records: &[MaxTimeRecord]) -> Result<()> {
    let methods: Vec<Method> = records
        .first()
        .map(|r| r.frontiers.iter().map(|f| f.method).collect())
        .unwrap_or_else(|| {
            let mut m = vec![Method::Variational];
            m.extend(TrotterOrder::ALL.map(Method::Trotter));
            m
        });
    let mut header = vec!["threshold".to_string(), "k".to_string()];
    for m in &methods {
        header.extend(FRONTIER_FIELDS.iter().map(|f| format!("{m}_{f}")));
    }
    header.push("ratio_T_var_over_T_q1".into());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![fmt_f(r.threshold), r.k.to_string()];
            for f in &r.frontiers {
                row.extend([
                    f.steps.to_string(),
                    f.grid_index.to_string(),
                    fmt_f(f.scaled_t_max),
                    fmt_f(f.t_max),
                    fmt_f(f.horizon),
                    opt(f.error_at),
                    opt(f.error_next),
                    f.feasible.to_string(),
                    f.capped.to_string(),
                ]);
            }
            row.push(opt(r.reach_ratio));
            row
        })
        .collect();
    write_rows(path, &header, &rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub crate_version: String,
    pub seed: u64,
    pub parallel: bool,
    pub wall_time_seconds: f64,
    pub gate_convention: String,
    pub time_units: String,
    pub float_format: String,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub summary: serde_json::Value,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.effective_seed(),
            parallel: config.execution.is_parallel(),
            wall_time_seconds: 0.0,
            gate_convention: GATE_CONVENTION.to_string(),
            time_units: "scaled columns are sqrt(2n)*t; t is the raw time".to_string(),
            float_format: "{:.16e}, 17 significant digits".to_string(),
            outputs: Vec::new(),
            notes: Vec::new(),
            summary: serde_json::Value::Null,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2e-300, 123456.789e10, f64::MIN_POSITIVE] {
            let s = fmt_f(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
