use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use trotteropt::cost::CostPolynomial;
use trotteropt::dense::{normalized_norm_sq, second_order_dense};
use trotteropt::experiments::output::{
    write_maxtime_csv, write_repeat_csv, write_repeat_fits_csv, write_sweep_csv, Manifest, OUTPUT_DIR_ENV,
};
use trotteropt::experiments::{
    max_time_search, repeat_scaling, run_appendix_variants, sweep_time, ExperimentConfig, SweepOutput,
};
use trotteropt::model::{Connectivity, CouplingSpec, CustomTerm, HamiltonianModel};
use trotteropt::{Error, Execution, ParamSheet, Result};

#[derive(Parser)]
#[command(name = "trotteropt", version, about = "Classical pre-optimization of product formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// C, E and exact errors over a time grid, before and after optimization.
    Sweep(RunArgs),
    /// A pre-optimized step repeated K = 1..k_max times.
    Repeat(RunArgs),
    /// Largest reachable time per method under a fixed exponential budget.
    Maxtime(RunArgs),
    /// TFIM sweep plus sweeps of the main model at extra layer counts.
    Appendix(RunArgs),
    /// Analytic gradient of C² against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        layers: usize,
    },
    /// Symbolic C² against the dense second-order operator.
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Overrides the model and optimizer seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    memory_budget_mb: Option<u64>,
    /// Run every work item on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(r) = self.layers {
            cfg.layers = r;
        }
        if let Some(mb) = self.memory_budget_mb {
            cfg.memory_budget_mb = mb;
        }
        if self.sequential {
            cfg.execution = Execution::Sequential;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn optimum_summary(out: &SweepOutput) -> serde_json::Value {
    let o = &out.optimum;
    json!({
        "layers": out.layers,
        "unit_time_trotter_cost": o.trotter_cost,
        "unit_time_best_cost": o.best_cost,
        "converged": o.converged,
        "winning_restart": o.restart,
        "iterations": o.iterations,
        "warning": o.warning,
        "perturbative_only": out.perturbative_only,
    })
}

fn finish(mut manifest: Manifest, dir: &Path, start: Instant) -> Result<()> {
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    let path = manifest.write(dir)?;
    for out in &manifest.outputs {
        println!("wrote {}", dir.join(out).display());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn run_experiment(name: &str, args: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = args.load()?;
    let dir = cfg.output_dir.clone();
    let mut manifest = Manifest::new(name, &cfg);
    match name {
        "sweep" => {
            let out = sweep_time(&cfg)?;
            write_sweep_csv(&dir.join("sweep.csv"), &out.records)?;
            manifest.outputs.push("sweep.csv".into());
            manifest.summary = optimum_summary(&out);
            if out.perturbative_only {
                manifest.notes.push("model exceeds the dense limit; ε columns are empty".into());
            }
        }
        "repeat" => {
            let out = repeat_scaling(&cfg)?;
            write_repeat_csv(&dir.join("repeat.csv"), &out.records)?;
            write_repeat_fits_csv(&dir.join("repeat_fits.csv"), &out.fits)?;
            manifest.outputs.extend(["repeat.csv".into(), "repeat_fits.csv".into()]);
            manifest.summary = json!({ "fits": out.fits, "unit_time_best_cost": out.optimum.best_cost });
        }
        "maxtime" => {
            let recs = max_time_search(&cfg)?;
            write_maxtime_csv(&dir.join("maxtime.csv"), &recs)?;
            manifest.outputs.push("maxtime.csv".into());
            let bracketed = recs
                .iter()
                .all(|r| r.frontiers.iter().all(|f| f.brackets(r.threshold)));
            manifest.summary = json!({ "bracketing_verified": bracketed });
        }
        "appendix" => {
            let out = run_appendix_variants(&cfg)?;
            write_sweep_csv(&dir.join("appendix_tfim.csv"), &out.tfim.records)?;
            manifest.outputs.push("appendix_tfim.csv".into());
            let mut summary = vec![json!({ "model": "tfim", "optimum": optimum_summary(&out.tfim) })];
            for run in &out.layered {
                let file = format!("appendix_r{}.csv", run.layers);
                write_sweep_csv(&dir.join(&file), &run.records)?;
                manifest.outputs.push(file);
                summary.push(json!({ "model": "main", "optimum": optimum_summary(run) }));
            }
            manifest.summary = json!(summary);
            manifest.notes.extend(out.notes);
        }
        _ => unreachable!(),
    }
    finish(manifest, &dir, start)
}

fn random_model(n: usize, rng: &mut ChaCha8Rng) -> Result<HamiltonianModel> {
    match rng.random_range(0..3) {
        0 => CouplingSpec::tfim(Connectivity::Full { n }, rng.random()).build(),
        1 => CouplingSpec::xy(Connectivity::Full { n }, rng.random()).build(),
        _ => {
            let count = 3 + rng.random_range(0..2 * n);
            let mut labels = std::collections::BTreeSet::new();
            let mut terms = Vec::new();
            while terms.len() < count.min(4usize.pow(n as u32) - 1) {
                let label: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
                if label.chars().any(|c| c != 'I') && labels.insert(label.clone()) {
                    terms.push(CustomTerm {
                        pauli: label,
                        coeff: rng.random_range(-1.0..1.0),
                    });
                }
            }
            CouplingSpec::custom(terms, true).build()
        }
    }
}

fn random_sheet(model: &HamiltonianModel, layers: usize, rng: &mut ChaCha8Rng) -> Result<ParamSheet> {
    let t = rng.random_range(0.05..0.8);
    let c = model.coefficients();
    let free: Vec<f64> = (0..(layers - 1) * c.len())
        .map(|i| t * c[i % c.len()] / layers as f64 + 0.1 * t * rng.random_range(-1.0..1.0))
        .collect();
    ParamSheet::from_free(layers, &free, t, &c)
}

fn gradcheck(n: usize, seed: u64, points: usize, layers: usize) -> Result<bool> {
    if layers < 2 || n < 2 {
        return Err(Error::InvalidConfig("gradcheck needs n ≥ 2 and at least two layers".into()));
    }
    let model = CouplingSpec::xy(Connectivity::Full { n }, seed).build()?;
    let poly = CostPolynomial::compile(&model, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let sheet = random_sheet(&model, layers, &mut rng)?;
        let grad = poly.grad_cost_sq(&sheet)?;
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if scale == 0.0 {
            continue;
        }
        let free = sheet.free_params().to_vec();
        let h = 1e-4 * sheet.time() / layers as f64;
        for i in 0..free.len() {
            let eval = |d: f64| -> Result<f64> {
                let mut s = sheet.clone();
                let mut f = free.clone();
                f[i] += d;
                s.set_free(&f)?;
                poly.cost_sq(&s)
            };
            let fd = (eval(h)? - eval(-h)?) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / scale);
        }
    }
    println!("max relative gradient error: {worst:.3e} ({points} points, n = {n}, R = {layers})");
    Ok(worst < 1e-6)
}

fn oracle_check(n: usize, trials: usize, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let model = random_model(n, &mut rng)?;
        let layers = rng.random_range(2..=4);
        let sheet = random_sheet(&model, layers, &mut rng)?;
        let symbolic = CostPolynomial::compile(&model, false)?.cost_sq(&sheet)?;
        let dense = normalized_norm_sq(&second_order_dense(&model, &sheet)?);
        let err = if dense > 1e-24 {
            (symbolic - dense).abs() / dense
        } else {
            (symbolic - dense).abs()
        };
        worst = worst.max(err);
    }
    println!("max relative error of C² against the dense operator: {worst:.3e} ({trials} trials, n = {n})");
    Ok(worst <= 1e-10)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sweep(a) => run_experiment("sweep", &a).map(|_| true),
        Command::Repeat(a) => run_experiment("repeat", &a).map(|_| true),
        Command::Maxtime(a) => run_experiment("maxtime", &a).map(|_| true),
        Command::Appendix(a) => run_experiment("appendix", &a).map(|_| true),
        Command::Gradcheck { n, seed, points, layers } => gradcheck(n, seed, points, layers),
        Command::OracleCheck { n, trials, seed } => oracle_check(n, trials, seed),
    }
}

fn category(e: &Error) -> &'static str {
    match e.exit_code() {
        2 => "configuration",
        3 => "capacity",
        4 => "numerical",
        _ => "runtime",
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error ({}): {e}", category(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
