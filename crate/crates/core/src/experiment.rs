//! End-to-end experiment runner: data, base predictors, prior, posterior,
//! baselines, metrics and aggregation over seeded repetitions.
//!
//! Output layout under `out`:
//!
//! ```text
//! rep_<r>/metrics.json, metrics.csv, mixture_bound.json, loss_trace.csv,
//!         iabma_weights.csv, test_loglik.csv, predictors.json, posterior_net.json
//! aggregate.csv, aggregate.txt, manifest.json
//! ```
//!
//! Every file except `manifest.json` is a deterministic function of the
//! config and master seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_baseline, Averager, BaselineKind, DlaConfig};
use crate::data::{load_csv, simulate_two_region, split, CsvSchema, SimulationConfig, SplitConfig, Standardizer};
use crate::error::{Error, Result};
use crate::math::{mean, sample_sd};
use crate::metrics::{mixture_prediction, mixture_bound_check, MetricReport, MixtureBoundReport, DEFAULT_BINS};
use crate::posterior::{train_posterior, trace_csv, EpochStats, PosteriorNet, TrainConfig};
use crate::predictors::{
    fit_roster, loglik_table, regression_roster, simulation_roster, BasePredictor, ModelSpec, PredictorSet,
    PredictorSpec,
};
use crate::prior::{EnergyCache, EnergyMode, MonteCarlo, DEFAULT_MC_SAMPLES};
use crate::types::{Dataset, LikelihoodTable, SimplexWeights, Task};

/// Name of the input-adaptive method in configs and reports.
pub const IABMA: &str = "iabma";

/// Every method name accepted in `methods`.
pub const METHOD_NAMES: [&str; 7] = [
    IABMA,
    "best_single",
    "uniform",
    "accuracy_weighted",
    "classical_bma",
    "moe",
    "dla",
];

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `r`: `splitmix64(master ^ splitmix64(r))`. Depends
/// only on `master` and `r`, so adding repetitions leaves earlier ones intact.
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    splitmix64(master ^ splitmix64(r as u64))
}

/// Purpose-specific seed within a repetition.
fn sub_seed(rep_seed: u64, purpose: u64) -> u64 {
    splitmix64(rep_seed ^ purpose.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

const SEED_DATA: u64 = 1;
const SEED_NET: u64 = 2;
const SEED_SHUFFLE: u64 = 3;
const SEED_MC: u64 = 4;
const SEED_MOE_NET: u64 = 5;
const SEED_MOE_SHUFFLE: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Fresh two-region data each repetition; `seed` is replaced by a derived seed.
    Simulate(SimulationConfig),
    Csv {
        path: PathBuf,
        schema: CsvSchema,
        #[serde(default)]
        split: SplitConfig,
        /// Standardize features (and a regression target) with training statistics.
        #[serde(default = "yes")]
        standardize: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// Monte-Carlo outcome samples `K` for regression.
    pub mc_samples: usize,
    /// Integration range; defaults to `[min − sd, max + sd]` of training labels.
    pub y_range: Option<[f64; 2]>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mc_samples: DEFAULT_MC_SAMPLES,
            y_range: None,
        }
    }
}

/// A full experiment description, read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Defaults to the task's standard roster.
    #[serde(default)]
    pub predictors: Option<Vec<PredictorSpec>>,
    #[serde(default = "all_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub iabma: TrainConfig,
    #[serde(default)]
    pub moe: TrainConfig,
    #[serde(default)]
    pub dla: DlaConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "default_bins")]
    pub metric_bins: usize,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn all_methods() -> Vec<String> {
    METHOD_NAMES.iter().map(|s| s.to_string()).collect()
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    /// Config for the two-region simulation with all methods.
    pub fn simulation(repetitions: usize, seed: u64) -> Self {
        Self {
            data: DataSource::Simulate(SimulationConfig::default()),
            predictors: None,
            methods: all_methods(),
            iabma: TrainConfig::default(),
            moe: TrainConfig::default(),
            dla: DlaConfig {
                temperature: 0.8,
                ..DlaConfig::default()
            },
            prior: PriorConfig::default(),
            metric_bins: DEFAULT_BINS,
            repetitions,
            seed,
            out: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config file; a relative CSV path is resolved against the
    /// directory containing the config.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn task(&self) -> Task {
        match &self.data {
            DataSource::Simulate(_) => Task::Classification,
            DataSource::Csv { schema, .. } => schema.task,
        }
    }

    pub fn roster(&self) -> Vec<PredictorSpec> {
        if let Some(p) = &self.predictors {
            return p.clone();
        }
        match (&self.data, self.task()) {
            (DataSource::Simulate(sim), _) => simulation_roster(sim.offset),
            (_, Task::Regression) => regression_roster(),
            (_, Task::Classification) => vec![
                PredictorSpec::new(ModelSpec::PolyLogreg { degree: 1 }),
                PredictorSpec::new(ModelSpec::PolyLogreg { degree: 2 }),
                PredictorSpec::new(ModelSpec::Lda),
            ],
        }
    }

    /// Baselines requested in `methods`, in order.
    pub fn baselines(&self) -> Result<Vec<BaselineKind>> {
        let mut out = Vec::new();
        for name in &self.methods {
            let kind = match name.as_str() {
                IABMA => continue,
                "best_single" => BaselineKind::BestSingle,
                "uniform" => BaselineKind::Uniform,
                "accuracy_weighted" => BaselineKind::AccuracyWeighted,
                "classical_bma" => BaselineKind::ClassicalBma,
                "moe" => BaselineKind::Moe(self.moe.clone()),
                "dla" => BaselineKind::Dla(self.dla),
                other => {
                    return Err(Error::Validation(format!(
                        "unknown method '{other}' (expected one of {})",
                        METHOD_NAMES.join(", ")
                    )))
                }
            };
            out.push(kind);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Validation("repetitions must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Validation("method list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.methods.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::Validation(format!("method '{dup}' listed twice")));
        }
        for b in self.baselines()? {
            b.validate()?;
        }
        if self.methods.iter().any(|m| m == IABMA) {
            self.iabma.validate()?;
        }
        if self.metric_bins == 0 {
            return Err(Error::Validation("metric_bins must be >= 1".into()));
        }
        if self.prior.mc_samples == 0 {
            return Err(Error::Validation("prior.mc_samples must be >= 1".into()));
        }
        if let Some([lo, hi]) = self.prior.y_range {
            if !(lo < hi) {
                return Err(Error::Validation("prior.y_range must satisfy lo < hi".into()));
            }
        }
        match &self.data {
            DataSource::Simulate(sim) => sim.validate()?,
            DataSource::Csv { split, .. } => split.validate()?,
        }
        let roster = self.roster();
        if roster.is_empty() {
            return Err(Error::Validation("predictor roster is empty".into()));
        }
        if let Some(p) = roster.iter().find(|p| p.model.task() != self.task()) {
            return Err(Error::Validation(format!(
                "predictor {} does not fit a {} task",
                p.display_name(),
                self.task()
            )));
        }
        Ok(())
    }
}

/// Everything computed in one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub predictors: Vec<BasePredictor>,
    pub test_table: LikelihoodTable,
    pub reports: Vec<MetricReport>,
    /// Per method, the pointwise inequality check on test rows.
    pub theorem: Vec<(String, MixtureBoundReport)>,
    pub iabma_weights: Option<Vec<SimplexWeights>>,
    pub iabma_net: Option<PosteriorNet>,
    pub trace: Vec<EpochStats>,
    pub notes: Vec<String>,
}

fn prepare_data(cfg: &ExperimentConfig, source: Option<&Dataset>, rep_seed: u64) -> Result<(Dataset, Dataset, Vec<String>)> {
    match &cfg.data {
        DataSource::Simulate(sim) => {
            let sim = SimulationConfig {
                seed: sub_seed(rep_seed, SEED_DATA),
                ..sim.clone()
            };
            let (train, test) = simulate_two_region(&sim)?;
            Ok((train, test, Vec::new()))
        }
        DataSource::Csv {
            split: split_cfg,
            standardize,
            ..
        } => {
            let data = source.expect("CSV data is loaded before repetitions");
            let s = split(data, split_cfg, sub_seed(rep_seed, SEED_DATA))?;
            if *standardize {
                let z = Standardizer::fit(&s.train, true)?;
                Ok((z.apply(&s.train)?, z.apply(&s.test)?, s.notes))
            } else {
                Ok((s.train, s.test, s.notes))
            }
        }
    }
}

/// Runs one repetition in memory.
pub fn run_repetition(cfg: &ExperimentConfig, source: Option<&Dataset>, r: usize) -> Result<RepetitionResult> {
    let rep_seed = repetition_seed(cfg.seed, r);
    let (train, test, notes) = prepare_data(cfg, source, rep_seed)?;
    let predictors = fit_roster(&cfg.roster(), &train)?;
    let train_table = loglik_table(&predictors, &train)?;
    let test_table = loglik_table(&predictors, &test)?;
    let names: Vec<String> = predictors.iter().map(|p| p.name.clone()).collect();

    let mut averagers: Vec<(String, Averager)> = Vec::new();
    let mut trace = Vec::new();
    let mut iabma_net = None;
    for method in &cfg.methods {
        if method == IABMA {
            let mode = match train.task() {
                Task::Classification => EnergyMode::Discrete {
                    num_classes: train.num_classes().expect("classification"),
                },
                Task::Regression => {
                    let (lo, hi) = match cfg.prior.y_range {
                        Some([lo, hi]) => (lo, hi),
                        None => MonteCarlo::default_range(train.real_labels()?)?,
                    };
                    EnergyMode::Continuous(MonteCarlo::draw(
                        cfg.prior.mc_samples,
                        lo,
                        hi,
                        sub_seed(rep_seed, SEED_MC),
                    )?)
                }
            };
            let cache = EnergyCache::build(&predictors, train.features(), mode)?;
            let priors = (0..train.n()).map(|i| cache.loo_prior(i)).collect::<Result<Vec<_>>>()?;
            let train_cfg = TrainConfig {
                seed: sub_seed(rep_seed, SEED_SHUFFLE),
                ..cfg.iabma.clone()
            };
            let net = PosteriorNet::new(train.d(), predictors.len(), sub_seed(rep_seed, SEED_NET))?;
            let trained = train_posterior(net, &train, &train_table, &priors, &train_cfg)?;
            trace = trained.trace;
            iabma_net = Some(trained.net.clone());
            averagers.push((IABMA.into(), Averager::Net(trained.net)));
        } else {
            let kind = match cfg.baselines()?.into_iter().find(|b| b.name() == method) {
                Some(BaselineKind::Moe(moe)) => BaselineKind::Moe(TrainConfig {
                    seed: sub_seed(rep_seed, SEED_MOE_SHUFFLE),
                    ..moe
                }),
                Some(kind) => kind,
                None => return Err(Error::Validation(format!("unknown method '{method}'"))),
            };
            let avg = fit_baseline(&kind, &train, &train_table, &predictors, sub_seed(rep_seed, SEED_MOE_NET))?;
            averagers.push((method.clone(), avg));
        }
    }

    let mut reports = Vec::new();
    let mut theorem = Vec::new();
    let mut iabma_weights = None;
    for (method, avg) in averagers {
        let weights = avg.weights_for(&test)?;
        theorem.push((method.clone(), mixture_bound_check(&weights, &test_table)?));
        if method == IABMA {
            iabma_weights = Some(weights.clone());
        }
        let pred = mixture_prediction(&predictors, weights, &test, &test_table)?;
        reports.push(MetricReport::evaluate(&method, r, &pred, &test, cfg.metric_bins)?);
    }
    debug_assert_eq!(names.len(), test_table.m());
    Ok(RepetitionResult {
        repetition: r,
        seed: rep_seed,
        predictors,
        test_table,
        reports,
        theorem,
        iabma_weights,
        iabma_net,
        trace,
        notes,
    })
}

/// CSV with a header of model names and one row per example.
pub fn matrix_csv(names: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = names.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Reads a file written by [`matrix_csv`]: header names and numeric rows.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), r + 1)))?;
        let row = record
            .iter()
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| {
                    Error::Format(format!("{}: row {}: cannot parse '{c}'", path.display(), r + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok((names, rows))
}

/// Compact theorem-check summary written per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub method: String,
    pub rows: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub mean_mixture_loglik: f64,
    pub mean_selector_bound: f64,
    pub aggregate_slack: f64,
}

impl TheoremSummary {
    pub fn new(method: &str, r: &MixtureBoundReport) -> Self {
        Self {
            method: method.into(),
            rows: r.rows,
            violations: r.violations,
            max_violation: r.max_violation,
            mean_mixture_loglik: r.mean_mixture_loglik,
            mean_selector_bound: r.mean_selector_bound,
            aggregate_slack: r.aggregate_slack,
        }
    }
}

fn write_repetition(cfg: &ExperimentConfig, dir: &Path, res: &RepetitionResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&res.reports)?)?;
    let mut csv = String::from(MetricReport::CSV_HEADER);
    csv.push('\n');
    for r in &res.reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    fs::write(dir.join("metrics.csv"), csv)?;
    let summaries: Vec<TheoremSummary> = res.theorem.iter().map(|(m, r)| TheoremSummary::new(m, r)).collect();
    fs::write(dir.join("mixture_bound.json"), serde_json::to_string_pretty(&summaries)?)?;
    let names = res.test_table.names();
    fs::write(
        dir.join("test_loglik.csv"),
        matrix_csv(names, res.test_table.loglik().outer_iter().map(|r| r.to_vec())),
    )?;
    let task = res.predictors[0].task();
    fs::write(
        dir.join("predictors.json"),
        PredictorSet::new(task, res.predictors.clone()).to_json()?,
    )?;
    if let (Some(w), Some(net)) = (&res.iabma_weights, &res.iabma_net) {
        fs::write(
            dir.join("iabma_weights.csv"),
            matrix_csv(names, w.iter().map(|w| w.as_slice().to_vec())),
        )?;
        fs::write(dir.join("loss_trace.csv"), trace_csv(&res.trace))?;
        fs::write(
            dir.join("posterior_net.json"),
            serde_json::to_string(&net.to_document(&cfg.iabma)?)?,
        )?;
    }
    Ok(())
}

/// Mean and sample standard deviation of one metric for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub metric: String,
    pub mean: f64,
    /// 0 for a single repetition.
    pub sd: f64,
    pub n: usize,
}

/// Aggregates reports over repetitions, keeping method order and metric order.
pub fn aggregate(methods: &[String], reports: &[&MetricReport]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for method in methods {
        let mine: Vec<&&MetricReport> = reports.iter().filter(|r| &r.method == method).collect();
        let Some(first) = mine.first() else { continue };
        for (metric, _) in first.values() {
            let vals: Vec<f64> = mine
                .iter()
                .filter_map(|r| r.values().into_iter().find(|(k, _)| *k == metric).map(|(_, v)| v))
                .collect();
            let sd = if vals.len() > 1 { sample_sd(&vals) } else { 0.0 };
            rows.push(AggregateRow {
                method: method.clone(),
                metric: metric.into(),
                mean: mean(&vals),
                sd,
                n: vals.len(),
            });
        }
    }
    rows
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from("method,metric,mean,sd,n\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.method, r.metric, r.mean, r.sd, r.n);
    }
    s
}

/// Human-readable `mean (sd)` table, one line per method, metrics as columns.
pub fn aggregate_text(methods: &[String], rows: &[AggregateRow], failures: &[(usize, String)]) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    for r in rows {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
    }
    let mut s = format!("{:<18}", "method");
    for m in &metrics {
        let _ = write!(s, " {m:>22}");
    }
    s.push('\n');
    for method in methods {
        let _ = write!(s, "{method:<18}");
        for m in &metrics {
            match rows.iter().find(|r| &r.method == method && r.metric == *m) {
                Some(r) => {
                    let _ = write!(s, " {:>22}", format!("{:.4} ({:.4})", r.mean, r.sd));
                }
                None => {
                    let _ = write!(s, " {:>22}", "failed");
                }
            }
        }
        s.push('\n');
    }
    for (r, e) in failures {
        let _ = writeln!(s, "repetition {r} failed: {e}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionStatus {
    pub repetition: usize,
    pub seed: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Methods whose test weights broke the pointwise inequality.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theorem_violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: ExperimentConfig,
    pub repetitions: Vec<RepetitionStatus>,
}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    pub aggregate: Vec<AggregateRow>,
    pub statuses: Vec<RepetitionStatus>,
    pub results: Vec<RepetitionResult>,
}

impl RunSummary {
    pub fn theorem_violated(&self) -> bool {
        self.statuses.iter().any(|s| !s.theorem_violations.is_empty())
    }

    pub fn mean(&self, method: &str, metric: &str) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| r.method == method && r.metric == metric)
            .map(|r| r.mean)
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs all repetitions (in parallel) and writes every output file.
/// Fails only if the config is invalid or every repetition fails.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let started = unix_now();
    let source = match &cfg.data {
        DataSource::Csv { path, schema, .. } => Some(load_csv(path, schema)?),
        DataSource::Simulate(_) => None,
    };
    fs::create_dir_all(out)?;
    let outcomes: Vec<Result<RepetitionResult>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let res = run_repetition(cfg, source.as_ref(), r)?;
            write_repetition(cfg, &out.join(format!("rep_{r}")), &res)?;
            Ok(res)
        })
        .collect();

    let mut statuses = Vec::new();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let seed = repetition_seed(cfg.seed, r);
        match outcome {
            Ok(res) => {
                statuses.push(RepetitionStatus {
                    repetition: r,
                    seed,
                    ok: true,
                    error: None,
                    notes: res.notes.clone(),
                    theorem_violations: res
                        .theorem
                        .iter()
                        .filter(|(_, t)| !t.holds())
                        .map(|(m, _)| m.clone())
                        .collect(),
                });
                results.push(res);
            }
            Err(e) => {
                log::error!("repetition {r} failed: {e}");
                failures.push((r, e.to_string()));
                statuses.push(RepetitionStatus {
                    repetition: r,
                    seed,
                    ok: false,
                    error: Some(e.to_string()),
                    notes: Vec::new(),
                    theorem_violations: Vec::new(),
                });
            }
        }
    }
    let reports: Vec<&MetricReport> = results.iter().flat_map(|r| &r.reports).collect();
    let rows = aggregate(&cfg.methods, &reports);
    fs::write(out.join("aggregate.csv"), aggregate_csv(&rows))?;
    fs::write(out.join("aggregate.txt"), aggregate_text(&cfg.methods, &rows, &failures))?;
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").into(),
        started_unix: started,
        finished_unix: unix_now(),
        config: cfg.clone(),
        repetitions: statuses.clone(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    if results.is_empty() {
        return Err(Error::Training(format!(
            "all {} repetitions failed; first error: {}",
            cfg.repetitions,
            failures.first().map(|f| f.1.as_str()).unwrap_or("unknown")
        )));
    }
    Ok(RunSummary {
        out: out.to_path_buf(),
        aggregate: rows,
        statuses,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim(reps: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::simulation(reps, 5);
        cfg.data = DataSource::Simulate(SimulationConfig {
            n_train: 200,
            n_test: 100,
            ..SimulationConfig::default()
        });
        cfg.dla.k = 10;
        cfg.iabma.epochs = 2;
        cfg.moe.epochs = 2;
        cfg
    }

    #[test]
    fn seeds_are_stable_per_repetition() {
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        let a: Vec<u64> = (0..3).map(|r| repetition_seed(42, r)).collect();
        let b: Vec<u64> = (0..5).map(|r| repetition_seed(42, r)).collect();
        assert_eq!(a[..], b[..3]);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn unknown_method_is_rejected_up_front() {
        let mut cfg = small_sim(1);
        cfg.methods.push("stacking".into());
        let dir = tempfile::tempdir().unwrap();
        let err = run_experiment(&cfg, &dir.path().join("out")).unwrap_err();
        assert!(err.is_validation());
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"data": {"source": "simulate"}, "repetitions": 2}"#).unwrap();
        assert_eq!(cfg.methods.len(), 7);
        assert_eq!(cfg.iabma, TrainConfig::default());
        assert!(cfg.validate().is_ok());
        assert!(ExperimentConfig::from_json(r#"{"data": {"source": "simulate"}, "bogus": 1}"#).is_err());
        let bad = ExperimentConfig { repetitions: 0, ..cfg.clone() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { methods: vec![], ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn repetition_covers_all_methods() {
        let cfg = small_sim(1);
        let res = run_repetition(&cfg, None, 0).unwrap();
        let methods: Vec<&str> = res.reports.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(methods, METHOD_NAMES);
        for (_, t) in &res.theorem {
            assert!(t.holds());
        }
        assert_eq!(res.trace.len(), 2);
    }

    #[test]
    fn single_repetition_has_zero_sd() {
        let cfg = small_sim(1);
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(&cfg, dir.path()).unwrap();
        assert!(summary.aggregate.iter().all(|r| r.sd == 0.0 && r.n == 1));
        // one row per method × metric (accuracy, ece, mean_loglik)
        assert_eq!(summary.aggregate.len(), 7 * 3);
        for f in ["metrics.json", "metrics.csv", "mixture_bound.json", "loss_trace.csv", "iabma_weights.csv", "test_loglik.csv", "predictors.json", "posterior_net.json"] {
            assert!(dir.path().join("rep_0").join(f).exists(), "{f}");
        }
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn aggregate_math() {
        let mk = |rep, acc| MetricReport {
            method: "uniform".into(),
            repetition: rep,
            task: Task::Classification,
            accuracy: Some(acc),
            ece: None,
            rmse: None,
            r2: None,
            mean_loglik: -1.0,
            confidence_bins: vec![],
        };
        let (a, b) = (mk(0, 0.8), mk(1, 0.9));
        let rows = aggregate(&["uniform".into()], &[&a, &b]);
        assert_eq!(rows[0].metric, "accuracy");
        assert!((rows[0].mean - 0.85).abs() < 1e-15);
        assert!((rows[0].sd - (0.005f64).sqrt()).abs() < 1e-12);
        let text = aggregate_text(&["uniform".into(), "moe".into()], &rows, &[(3, "boom".into())]);
        assert!(text.contains("0.8500 (0.0707)"));
        assert!(text.contains("failed"));
        assert!(text.contains("repetition 3 failed: boom"));
    }
}
