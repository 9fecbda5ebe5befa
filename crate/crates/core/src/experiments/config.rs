use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::TrotterOrder;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Connectivity, CouplingSpec};
use crate::optimize::OptimizerSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// Grid in `√(2n)·t` units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            min: 0.01,
            max: 2.0,
            count: 24,
            spacing: Spacing::Log,
        }
    }
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == self.count - 1 {
                    return self.max;
                }
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + f * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.count >= 1
            && self.min.is_finite()
            && self.max.is_finite()
            && self.min > 0.0
            && (self.count == 1 || self.max > self.min);
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "time grid must be nonempty, positive and increasing (min {}, max {}, count {})",
                self.min, self.max, self.count
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepeatConfig {
    /// Single-step times in `√(2n)·t` units.
    pub times: Vec<f64>,
    pub k_max: usize,
    /// Slopes of the exact error only use points with `√(2n)·K·t` below this.
    pub fit_horizon: f64,
}

impl Default for RepeatConfig {
    fn default() -> Self {
        Self {
            times: vec![0.05, 0.5, 1.5],
            k_max: 10,
            fit_horizon: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaxTimeConfig {
    pub k_values: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Grid step in `√(2n)·t` units.
    pub step: f64,
    /// Largest grid point in `√(2n)·t` units.
    pub max: f64,
}

impl Default for MaxTimeConfig {
    fn default() -> Self {
        Self {
            k_values: vec![1, 2, 5, 10, 15, 20, 25, 30],
            thresholds: vec![1e-3, 1e-2],
            step: 0.01,
            max: 4.0,
        }
    }
}

impl MaxTimeConfig {
    pub fn grid_len(&self) -> usize {
        (self.max / self.step + 1e-9).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppendixConfig {
    pub tfim: CouplingSpec,
    pub layers: Vec<usize>,
}

impl Default for AppendixConfig {
    fn default() -> Self {
        Self {
            tfim: CouplingSpec::tfim(
                Connectivity::Lattice {
                    nx: 3,
                    ny: 3,
                    periodic: false,
                },
                0,
            ),
            layers: vec![4, 6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: CouplingSpec,
    pub layers: usize,
    pub grid: TimeGrid,
    /// Trotter orders `q` compared in sweeps and maximal-time searches.
    pub orders: Vec<u32>,
    pub repeat: RepeatConfig,
    pub maxtime: MaxTimeConfig,
    pub appendix: AppendixConfig,
    pub optimizer: OptimizerSettings,
    pub output_dir: PathBuf,
    /// Overrides the model and optimizer seeds when set.
    pub seed: Option<u64>,
    /// Caps the worker pool so concurrent dense evaluations fit.
    pub memory_budget_mb: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: CouplingSpec::xy(
                Connectivity::Lattice {
                    nx: 3,
                    ny: 3,
                    periodic: false,
                },
                0,
            ),
            layers: 3,
            grid: TimeGrid::default(),
            orders: vec![1, 2, 4],
            repeat: RepeatConfig::default(),
            maxtime: MaxTimeConfig::default(),
            appendix: AppendixConfig::default(),
            optimizer: OptimizerSettings::default(),
            output_dir: PathBuf::from("out"),
            seed: None,
            memory_budget_mb: 4096,
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.appendix.tfim.validate()?;
        self.optimizer.validate()?;
        self.grid.validate()?;
        if self.layers == 0 {
            return Err(Error::InvalidConfig("R must be at least 1".into()));
        }
        for &q in &self.orders {
            TrotterOrder::from_q(q)?;
        }
        let r = &self.repeat;
        if r.k_max == 0 || r.times.is_empty() || !increasing(&r.times) || r.times[0] <= 0.0 {
            return Err(Error::InvalidConfig(
                "repeat needs k_max ≥ 1 and positive increasing times".into(),
            ));
        }
        let m = &self.maxtime;
        if m.k_values.is_empty() || m.k_values[0] == 0 || m.k_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("maxtime K list must be nonempty, positive and increasing".into()));
        }
        if m.thresholds.is_empty() || m.thresholds.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidConfig("thresholds must lie in (0, 1)".into()));
        }
        if !(m.step > 0.0 && m.max >= m.step && m.step.is_finite() && m.max.is_finite()) {
            return Err(Error::InvalidConfig("maxtime grid needs 0 < step ≤ max".into()));
        }
        if self.appendix.layers.contains(&0) {
            return Err(Error::InvalidConfig("appendix layer counts must be positive".into()));
        }
        if self.memory_budget_mb == 0 {
            return Err(Error::InvalidConfig("memory budget must be positive".into()));
        }
        Ok(())
    }

    /// Applies the top-level seed, if any, to the model and optimizer.
    pub fn seeded(&self) -> Self {
        let mut cfg = self.clone();
        if let Some(seed) = self.seed {
            cfg.model.seed = seed;
            cfg.appendix.tfim.seed = seed;
            cfg.optimizer.seed = seed;
        }
        cfg.optimizer.execution = self.execution;
        cfg
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.model.seed)
    }

    pub fn memory_budget_bytes(&self) -> u64 {
        self.memory_budget_mb.saturating_mul(1 << 20)
    }

    pub fn trotter_orders(&self) -> Result<Vec<TrotterOrder>> {
        self.orders.iter().map(|&q| TrotterOrder::from_q(q)).collect()
    }
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite())
}
