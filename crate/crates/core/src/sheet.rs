//! Layer parameters `θ_{r,j}` of the product-formula ansatz.
//!
//! Layer `r = 0` is applied first. A constrained sheet slaves its last
//! layer so that every column sums to `t·c_j`; only the first `R − 1`
//! layers are free and the last one is recomputed on every update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSheet {
    layers: usize,
    terms: usize,
    /// Row-major `R × M`.
    theta: Vec<f64>,
    t: f64,
    /// `c_j`, kept for the constraint.
    coeffs: Vec<f64>,
    constrained: bool,
}

impl ParamSheet {
    /// Unconstrained sheet from a full row-major `R × M` matrix.
    pub fn unconstrained(layers: usize, theta: Vec<f64>, t: f64, coeffs: Vec<f64>) -> Result<Self> {
        let terms = coeffs.len();
        if layers == 0 || theta.len() != layers * terms {
            return Err(Error::InvalidConfig(format!(
                "sheet needs {layers}×{terms} entries, got {}",
                theta.len()
            )));
        }
        Ok(Self {
            layers,
            terms,
            theta,
            t,
            coeffs,
            constrained: false,
        })
    }

    /// Constrained sheet from the `(R − 1) × M` free parameters.
    pub fn from_free(layers: usize, free: &[f64], t: f64, coeffs: &[f64]) -> Result<Self> {
        let terms = coeffs.len();
        if layers == 0 || free.len() != (layers - 1) * terms {
            return Err(Error::InvalidConfig(format!(
                "constrained sheet needs {}×{terms} free entries, got {}",
                layers.saturating_sub(1),
                free.len()
            )));
        }
        let mut theta = free.to_vec();
        theta.resize(layers * terms, 0.0);
        let mut sheet = Self {
            layers,
            terms,
            theta,
            t,
            coeffs: coeffs.to_vec(),
            constrained: true,
        };
        sheet.recompute_last();
        Ok(sheet)
    }

    /// `θ_{r,j} = t c_j / R`.
    pub fn trotter(layers: usize, t: f64, coeffs: &[f64]) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidConfig("R must be at least 1".into()));
        }
        let row: Vec<f64> = coeffs.iter().map(|c| t * c / layers as f64).collect();
        let free: Vec<f64> = row.iter().copied().cycle().take((layers - 1) * coeffs.len()).collect();
        Self::from_free(layers, &free, t, coeffs)
    }

    fn recompute_last(&mut self) {
        let (r_last, m) = (self.layers - 1, self.terms);
        for j in 0..m {
            let head: f64 = (0..r_last).map(|r| self.theta[r * m + j]).sum();
            self.theta[r_last * m + j] = self.t * self.coeffs[j] - head;
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.theta[r * self.terms + j]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.theta[r * self.terms..(r + 1) * self.terms]
    }

    pub fn free_len(&self) -> usize {
        if self.constrained {
            (self.layers - 1) * self.terms
        } else {
            self.layers * self.terms
        }
    }

    /// Entries the optimizer may move.
    pub fn free_params(&self) -> &[f64] {
        &self.theta[..self.free_len()]
    }

    /// Replaces the free entries, recomputing a slaved last layer.
    pub fn set_free(&mut self, free: &[f64]) -> Result<()> {
        if free.len() != self.free_len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} free entries, got {}",
                self.free_len(),
                free.len()
            )));
        }
        let k = free.len();
        self.theta[..k].copy_from_slice(free);
        if self.constrained {
            self.recompute_last();
        }
        Ok(())
    }

    /// `ξ_j = Σ_r θ_{r,j} − t c_j`.
    pub fn xi(&self) -> Vec<f64> {
        (0..self.terms)
            .map(|j| (0..self.layers).map(|r| self.get(r, j)).sum::<f64>() - self.t * self.coeffs[j])
            .collect()
    }

    /// The sheet repeated `K` times: `KR` layers simulating time `K t`.
    pub fn repeat_sheet(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("repetition count must be ≥ 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let theta = self.theta.iter().copied().cycle().take(k * self.theta.len()).collect();
        Self::unconstrained(self.layers * k, theta, self.t * k as f64, self.coeffs.clone())
    }

    /// Every `θ` and `t` multiplied by `s`; a constrained sheet stays
    /// constrained.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.t *= s;
        for v in &mut out.theta {
            *v *= s;
        }
        out
    }

    /// Largest `|θ_{r,j}| / |t c_j|`; terms with `c_j = 0` are skipped.
    pub fn box_ratio(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.layers {
            for j in 0..self.terms {
                let scale = (self.t * self.coeffs[j]).abs();
                if scale > 0.0 {
                    worst = worst.max(self.get(r, j).abs() / scale);
                }
            }
        }
        worst
    }
}
