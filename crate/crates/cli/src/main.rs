//! `iabma`: simulation, experiment runs, the prior demo, the posterior-weight
//! inequality checker and gradient checks.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure,
//! 3 inequality violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use iabma_core::baselines::MoeObjective;
use iabma_core::data::{simulate_two_region, write_csv, SimulationConfig};
use iabma_core::experiment::{read_matrix_csv, run_experiment, ExperimentConfig};
use iabma_core::metrics::mixture_bound_check;
use iabma_core::posterior::{check_instance, grad_check, ElboObjective, OutputInit, PosteriorNet};
use iabma_core::prior::{bernoulli_demo, demo_csv, linspace};
use iabma_core::{Error, LikelihoodTable, SimplexWeights};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

/// Gradient checks fail above this relative error.
const GRAD_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "iabma", version, about = "Input-adaptive Bayesian model averaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-region train/test data as CSV.
    Simulate(SimulateArgs),
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Two-model Bernoulli prior demo: p(J=1 | x) over a grid.
    PriorDemo(PriorDemoArgs),
    /// Check log Σ w f ≥ log w_k + log f_k for a weights file and a log-likelihood table.
    TheoremCheck(TheoremArgs),
    /// Compare analytic and finite-difference gradients on a seeded instance.
    Gradcheck(GradArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    cov_scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "sim")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args)]
struct PriorDemoArgs {
    /// Slope of model 1; repeat for several curves.
    #[arg(long = "beta1", default_values_t = [3.0, 5.0, 9.0])]
    beta1: Vec<f64>,
    #[arg(long = "beta2", default_values_t = [1.0])]
    beta2: Vec<f64>,
    /// Training log-odds C_1 − C_2; defaults to ln 5.
    #[arg(long = "baseline-logodds", allow_hyphen_values = true)]
    baseline_logodds: Vec<f64>,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 161)]
    steps: usize,
    /// Directory for one CSV per parameter tuple; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoremArgs {
    /// CSV of per-row weights with model names as header.
    #[arg(long)]
    weights: PathBuf,
    /// CSV of per-row log-likelihoods with the same header.
    #[arg(long)]
    table: PathBuf,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 2)]
    inputs: usize,
    #[arg(long, default_value_t = 3)]
    models: usize,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [8, 6, 4])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    lambda_kl: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Run(a) => run(a),
        Command::PriorDemo(a) => prior_demo(a),
        Command::TheoremCheck(a) => theorem_check(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .is_some_and(Error::is_validation);
            ExitCode::from(if validation { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}

fn simulate(a: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut cfg: SimulationConfig = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .map_err(Error::from)?,
        None => SimulationConfig::default(),
    };
    cfg.n_train = a.n_train.unwrap_or(cfg.n_train);
    cfg.n_test = a.n_test.unwrap_or(cfg.n_test);
    cfg.offset = a.offset.unwrap_or(cfg.offset);
    cfg.cov_scale = a.cov_scale.unwrap_or(cfg.cov_scale);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let (train, test) = simulate_two_region(&cfg)?;
    fs::create_dir_all(&a.out)?;
    write_csv(&train, a.out.join("train.csv"))?;
    write_csv(&test, a.out.join("test.csv"))?;
    let manifest = serde_json::json!({
        "generator": "two_region",
        "prng": "ChaCha8 (train stream 0, test stream 1)",
        "config": cfg,
        "files": ["train.csv", "test.csv"],
    });
    fs::write(a.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {} train and {} test rows to {}", train.n(), test.n(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Precedence: command-line flags, then config keys, then built-in defaults.
fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_file(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if let Some(o) = a.out {
        cfg.out = Some(o);
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("iabma_out"));
    let summary = run_experiment(&cfg, &out)?;
    print!("{}", fs::read_to_string(out.join("aggregate.txt"))?);
    let failed = summary.statuses.iter().filter(|s| !s.ok).count();
    if failed > 0 {
        eprintln!("{failed} of {} repetitions failed; see manifest.json", cfg.repetitions);
    }
    if summary.theorem_violated() {
        eprintln!("pointwise inequality violated; see rep_*/mixture_bound.json");
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(ExitCode::SUCCESS)
}

fn demo_file(dir: &Path, b1: f64, b2: f64, base: f64) -> PathBuf {
    dir.join(format!("prior_demo_beta1_{b1}_beta2_{b2}_baseline_{base:.6}.csv"))
}

fn prior_demo(a: PriorDemoArgs) -> anyhow::Result<ExitCode> {
    let grid = linspace(a.x_min, a.x_max, a.steps)?;
    let baselines = if a.baseline_logodds.is_empty() {
        vec![5f64.ln()]
    } else {
        a.baseline_logodds
    };
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
    }
    for &b1 in &a.beta1 {
        for &b2 in &a.beta2 {
            for &base in &baselines {
                let csv = demo_csv(&bernoulli_demo(b1, b2, base, &grid)?);
                match &a.out {
                    Some(dir) => {
                        let path = demo_file(dir, b1, b2, base);
                        fs::write(&path, csv)?;
                        println!("{}", path.display());
                    }
                    None => {
                        println!("# beta1={b1} beta2={b2} baseline_logodds={base}");
                        print!("{csv}");
                    }
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn theorem_check(a: TheoremArgs) -> anyhow::Result<ExitCode> {
    let (w_names, w_rows) = read_matrix_csv(&a.weights)?;
    let (t_names, t_rows) = read_matrix_csv(&a.table)?;
    if w_names != t_names {
        return Err(Error::Validation(format!("weights header {w_names:?} does not match table header {t_names:?}")).into());
    }
    let weights = w_rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| SimplexWeights::new(r).with_context(|| format!("weights row {}", i + 1)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let m = t_names.len();
    if t_rows.iter().any(|r| r.len() != m) {
        return Err(Error::Format("ragged log-likelihood table".into()).into());
    }
    let flat: Vec<f64> = t_rows.iter().flatten().copied().collect();
    let ll = Array2::from_shape_vec((t_rows.len(), m), flat).map_err(|e| Error::Format(e.to_string()))?;
    let table = LikelihoodTable::new(ll, t_names)?;
    let report = mixture_bound_check(&weights, &table)?;
    println!("rows: {}", report.rows);
    println!("models: {}", report.models);
    println!("max violation: {:e}", report.max_violation);
    println!("rows violating (> {:e}): {}", report.tolerance, report.violations);
    println!("mean mixture log-likelihood: {}", report.mean_mixture_loglik);
    println!("mean argmax-selector bound: {}", report.mean_selector_bound);
    println!("aggregate slack: {}", report.aggregate_slack);
    if report.holds() {
        println!("inequality holds");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("inequality VIOLATED");
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn gradcheck(a: GradArgs) -> anyhow::Result<ExitCode> {
    if a.rows > 8 {
        bail!(Error::Validation("gradcheck uses at most 8 rows".into()));
    }
    let (x, table, priors) = check_instance(a.rows, a.inputs, a.models, a.seed)?;
    let mut net = PosteriorNet::with_hidden(a.inputs, &a.hidden, a.models, a.seed, OutputInit::Random)?;
    net.jitter(0.1, a.seed.wrapping_add(1));
    let rows: Vec<usize> = (0..a.rows).collect();
    let elbo = grad_check(&net, &x, &ElboObjective::new(&table, &priors, a.lambda_kl)?, &rows)?;
    let moe = grad_check(&net, &x, &MoeObjective::new(&table), &rows)?;
    println!("parameters: {}", net.param_count());
    println!("elbo max relative error: {elbo:e}");
    println!("moe max relative error: {moe:e}");
    if elbo < GRAD_TOL && moe < GRAD_TOL {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed (tolerance {GRAD_TOL:e})");
        Ok(ExitCode::from(EXIT_RUNTIME))
    }
}
