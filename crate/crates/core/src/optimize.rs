//! Projected limited-memory quasi-Newton minimization of `C²`.
//!
//! `C²` is homogeneous of degree four: scaling every parameter and the time
//! by `s` multiplies it by `s⁴`, and the box and restart offsets scale the
//! same way. Every problem is therefore solved at unit time and the
//! optimum rescaled, so one solve serves all times.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cost::{CostPolynomial, UnitCellCost};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::HamiltonianModel;
use crate::sheet::ParamSheet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Stop once `‖∇C²‖ < gradient_tolerance · max(1, C²(θ_T))`, measured at
    /// unit time.
    pub gradient_tolerance: f64,
    /// Perturbed restarts in addition to the run from the Trotter point.
    pub restarts: usize,
    /// Restart offsets are Gaussian with deviation
    /// `perturbation_scale · t · max|c_j|`.
    pub perturbation_scale: f64,
    /// `|θ_{r,j}| ≤ box_factor · |t c_j|`.
    pub box_factor: f64,
    /// Stored curvature pairs.
    pub memory: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-10,
            restarts: 8,
            perturbation_scale: 0.1,
            box_factor: 2.0,
            memory: 10,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConfig("gradient tolerance must be positive".into()));
        }
        if !(self.box_factor >= 1.0) {
            return Err(Error::InvalidConfig("box factor must be at least 1".into()));
        }
        if !(self.perturbation_scale >= 0.0) {
            return Err(Error::InvalidConfig("perturbation scale must be non-negative".into()));
        }
        if self.memory == 0 {
            return Err(Error::InvalidConfig("quasi-Newton memory must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub run: usize,
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best_sheet: ParamSheet,
    /// `C` of the best sheet.
    pub best_cost: f64,
    pub trotter_cost: f64,
    /// Accepted iterates of every run, in the time units of the request.
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    /// Run that produced the best sheet; run 0 starts at the Trotter point.
    pub restart: usize,
    pub iterations: usize,
    /// Set when `R < 3`, where descent from the Trotter point is not
    /// guaranteed.
    pub warning: Option<String>,
}

impl OptimizationResult {
    /// The best sheet at time `factor · t`. A result that skipped the
    /// descent is rebuilt as a Trotter sheet, so it matches one bit for bit.
    pub fn sheet_scaled(&self, factor: f64) -> ParamSheet {
        let s = &self.best_sheet;
        if self.iterations == 0 && self.trace.is_empty() && s.is_constrained() {
            if let Ok(t) = ParamSheet::trotter(s.layers(), s.time() * factor, s.coefficients()) {
                return t;
            }
        }
        s.scaled(factor)
    }

    /// The same optimum at time `factor · t`. Exact, since the problem at
    /// any time is a rescaling of the unit-time one.
    pub fn rescaled(&self, factor: f64) -> OptimizationResult {
        let (f2, f3) = (factor * factor, (factor * factor * factor).abs());
        OptimizationResult {
            best_sheet: self.sheet_scaled(factor),
            best_cost: self.best_cost * f2,
            trotter_cost: self.trotter_cost * f2,
            trace: self
                .trace
                .iter()
                .map(|e| TraceEntry {
                    cost: e.cost * f2,
                    grad_norm: e.grad_norm * f3,
                    ..*e
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// `C²` and its gradient with respect to a sheet's free entries.
trait Objective: Sync {
    fn eval(&self, sheet: &ParamSheet) -> Result<(f64, Vec<f64>)>;
}

impl Objective for CostPolynomial {
    fn eval(&self, sheet: &ParamSheet) -> Result<(f64, Vec<f64>)> {
        self.cost_sq_and_grad(sheet)
    }
}

impl Objective for UnitCellCost {
    fn eval(&self, sheet: &ParamSheet) -> Result<(f64, Vec<f64>)> {
        self.cost_sq_and_grad(sheet)
    }
}

struct RunOutcome {
    sheet: ParamSheet,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<(usize, f64, f64)>,
}

struct Problem<'a, O: Objective> {
    objective: &'a O,
    template: ParamSheet,
    /// Per-column bound `box_factor · |c_j|` at unit time.
    bounds: Vec<f64>,
    settings: &'a OptimizerSettings,
    tolerance: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<O: Objective> Problem<'_, O> {
    fn terms(&self) -> usize {
        self.template.terms()
    }

    fn project(&self, x: &mut [f64]) {
        let m = self.terms();
        for (i, v) in x.iter_mut().enumerate() {
            let b = self.bounds[i % m];
            *v = v.clamp(-b, b);
        }
    }

    fn sheet(&self, x: &[f64]) -> Result<ParamSheet> {
        let mut s = self.template.clone();
        s.set_free(x)?;
        Ok(s)
    }

    /// Whether the slaved last layer respects the box.
    fn feasible(&self, sheet: &ParamSheet) -> bool {
        let r = sheet.layers() - 1;
        sheet
            .row(r)
            .iter()
            .zip(&self.bounds)
            .all(|(v, b)| v.abs() <= b * (1.0 + 1e-12))
    }

    fn eval(&self, x: &[f64]) -> Result<(ParamSheet, f64, Vec<f64>)> {
        let sheet = self.sheet(x)?;
        let (f, g) = self.objective.eval(&sheet)?;
        let m = self.terms();
        if !f.is_finite() {
            return Err(Error::Numerical("cost is not finite".into()));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "gradient entry θ[{}][{}] is not finite",
                i / m,
                i % m
            )));
        }
        Ok((sheet, f, g))
    }

    /// Gradient with components pushing out of an active bound removed.
    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let m = self.terms();
        x.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (&xi, &gi))| {
                let b = self.bounds[i % m];
                if (xi >= b && gi < 0.0) || (xi <= -b && gi > 0.0) {
                    0.0
                } else {
                    gi
                }
            })
            .collect()
    }

    fn run(&self, run: usize, start: Vec<f64>) -> Result<RunOutcome> {
        let settings = self.settings;
        let mut x = start;
        self.project(&mut x);
        let (mut sheet, mut f, mut g) = self.eval(&x)?;
        if !self.feasible(&sheet) {
            return Err(Error::Numerical("restart point violates the box".into()));
        }
        let mut trace = vec![(0usize, f, norm(&g))];
        let mut s_hist: Vec<Vec<f64>> = Vec::new();
        let mut y_hist: Vec<Vec<f64>> = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        for it in 1..=settings.max_iterations {
            let pg = self.projected_gradient(&x, &g);
            if norm(&pg) < self.tolerance || f == 0.0 {
                converged = true;
                break;
            }
            let mut d = two_loop(&pg, &s_hist, &y_hist);
            if dot(&d, &pg) >= 0.0 {
                d = pg.iter().map(|v| -v).collect();
                s_hist.clear();
                y_hist.clear();
            }

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                self.project(&mut trial);
                let candidate = self.sheet(&trial)?;
                if self.feasible(&candidate) {
                    let (cs, cf, cg) = self.eval(&trial)?;
                    let delta: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let decrease = dot(&g, &delta);
                    if cf <= f && cf <= f + 1e-4 * decrease {
                        accepted = Some((trial, cs, cf, cg, delta));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((nx, ns, nf, ng, s)) = accepted else {
                // no admissible descent left at machine precision
                converged = norm(&pg) < self.tolerance.max(1e-8 * f.sqrt());
                break;
            };
            let y: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if s_hist.len() == settings.memory {
                    s_hist.remove(0);
                    y_hist.remove(0);
                }
                s_hist.push(s);
                y_hist.push(y);
            }
            let stalled = f - nf <= 1e-15 * f;
            x = nx;
            sheet = ns;
            f = nf;
            g = ng;
            iterations = it;
            trace.push((it, f, norm(&g)));
            if stalled && norm(&self.projected_gradient(&x, &g)) < self.tolerance.sqrt() {
                converged = true;
                break;
            }
        }
        let _ = run;
        Ok(RunOutcome {
            sheet,
            value: f,
            iterations,
            converged,
            trace,
        })
    }
}

/// L-BFGS two-loop recursion returning the search direction `−H g`.
fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q = g.to_vec();
    let k = s_hist.len();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        alpha[i] = rho * dot(&s_hist[i], &q);
        for (qv, yv) in q.iter_mut().zip(&y_hist[i]) {
            *qv -= alpha[i] * yv;
        }
    }
    if k > 0 {
        let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
        for v in &mut q {
            *v *= gamma;
        }
    }
    for i in 0..k {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        let beta = rho * dot(&y_hist[i], &q);
        for (qv, sv) in q.iter_mut().zip(&s_hist[i]) {
            *qv += (alpha[i] - beta) * sv;
        }
    }
    q.iter().map(|v| -v).collect()
}

fn restart_points(
    template: &ParamSheet,
    bounds: &[f64],
    settings: &OptimizerSettings,
) -> Result<Vec<Vec<f64>>> {
    let base = template.free_params().to_vec();
    let m = template.terms();
    let cmax = template.coefficients().iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let sigma = settings.perturbation_scale * cmax;
    let mut starts = vec![base.clone()];
    for i in 0..settings.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(i as u64 + 1));
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
        let noise: Vec<f64> = (0..base.len()).map(|_| normal.sample(&mut rng)).collect();
        // shrink until the slaved layer is back inside the box
        let mut scale = sigma;
        let mut point = base.clone();
        for _ in 0..30 {
            let mut trial: Vec<f64> = base.iter().zip(&noise).map(|(b, z)| b + scale * z).collect();
            for (k, v) in trial.iter_mut().enumerate() {
                *v = v.clamp(-bounds[k % m], bounds[k % m]);
            }
            let mut s = template.clone();
            s.set_free(&trial)?;
            let last = s.row(s.layers() - 1);
            if last.iter().zip(bounds).all(|(v, b)| v.abs() <= *b) {
                point = trial;
                break;
            }
            scale *= 0.5;
        }
        starts.push(point);
    }
    Ok(starts)
}

fn solve<O: Objective>(
    objective: &O,
    coeffs: &[f64],
    t: f64,
    layers: usize,
    settings: &OptimizerSettings,
    has_pairs: bool,
) -> Result<OptimizationResult> {
    settings.validate()?;
    if layers == 0 {
        return Err(Error::InvalidConfig("R must be at least 1".into()));
    }
    let warning = (layers < 3).then(|| format!("R = {layers} < 3: descent from the Trotter point is not guaranteed"));
    let unit = ParamSheet::trotter(layers, 1.0, coeffs)?;
    let (trotter_unit, _) = objective.eval(&unit)?;
    let trotter_cost = trotter_unit.sqrt() * t * t;

    if !has_pairs || layers == 1 || t == 0.0 || trotter_unit == 0.0 {
        return Ok(OptimizationResult {
            best_sheet: ParamSheet::trotter(layers, t, coeffs)?,
            best_cost: trotter_cost,
            trotter_cost,
            trace: Vec::new(),
            converged: true,
            restart: 0,
            iterations: 0,
            warning,
        });
    }

    let bounds: Vec<f64> = coeffs.iter().map(|c| settings.box_factor * c.abs()).collect();
    let problem = Problem {
        objective,
        template: unit.clone(),
        bounds: bounds.clone(),
        settings,
        tolerance: settings.gradient_tolerance * trotter_unit.max(1.0),
    };
    let starts = restart_points(&unit, &bounds, settings)?;
    let indexed: Vec<(usize, Vec<f64>)> = starts.into_iter().enumerate().collect();
    let outcomes = settings
        .execution
        .try_map(&indexed, |(run, x0)| problem.run(*run, x0.clone()))?;

    let (winner, best) = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .expect("at least the Trotter run exists");

    // back to the requested time: θ scales with t, C² with t⁴, ∇C² with t³
    let (t2, t3) = (t * t, (t * t * t).abs());
    let trace = outcomes
        .iter()
        .enumerate()
        .flat_map(|(run, o)| {
            o.trace.iter().map(move |&(iteration, c2, g)| TraceEntry {
                run,
                iteration,
                cost: c2.sqrt() * t2,
                grad_norm: g * t3,
            })
        })
        .collect();
    Ok(OptimizationResult {
        best_sheet: best.sheet.scaled(t),
        best_cost: best.value.sqrt() * t2,
        trotter_cost,
        trace,
        converged: best.converged,
        restart: winner,
        iterations: best.iterations,
        warning,
    })
}

/// Minimizes `C²` over the `(R − 1) × M` free parameters.
pub fn minimize(
    poly: &CostPolynomial,
    model: &HamiltonianModel,
    t: f64,
    layers: usize,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    if poly.terms() != model.len() {
        return Err(Error::InvalidConfig("cost polynomial and model disagree".into()));
    }
    solve(poly, &model.coefficients(), t, layers, settings, !poly.pair_list().is_empty())
}

/// Minimizes `C_unit²` over class-shared parameters `θ_{r,a}`; the best
/// sheet is `R × A`.
pub fn minimize_shared(
    unit: &UnitCellCost,
    t: f64,
    layers: usize,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    solve(
        unit,
        unit.class_coefficients(),
        t,
        layers,
        settings,
        !unit.polynomial().pair_list().is_empty(),
    )
}
