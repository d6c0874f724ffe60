//! Comparison methods sharing the likelihood-table interface.
//!
//! Constant weightings: best single model, uniform, accuracy-weighted and
//! classical BMA. Input-dependent weightings: a mixture-of-experts gate over
//! frozen experts, and dynamic local accuracy (DLA) over nearest neighbours.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::{argmax, lse_unchecked, sample_sd, softmax};
use crate::posterior::{self, EpochStats, PosteriorNet, RowObjective, RowTerms, TrainConfig};
use crate::predictors::BasePredictor;
use crate::types::{Dataset, LikelihoodTable, SimplexWeights, Task};

/// Added to RMSE before inverting for regression accuracy weights.
pub const RMSE_EPS: f64 = 1e-12;

pub fn weights_uniform(m: usize) -> Result<SimplexWeights> {
    SimplexWeights::uniform(m)
}

/// One-hot on the model with the largest total training log-likelihood.
pub fn weights_best_single(train_table: &LikelihoodTable) -> Result<SimplexWeights> {
    SimplexWeights::one_hot(train_table.m(), argmax(&train_table.column_sums()))
}

/// `softmax(Σ_i ℓ_ij)`: uniform model prior times the training likelihood.
pub fn weights_bma(train_table: &LikelihoodTable) -> Result<SimplexWeights> {
    softmax(&train_table.column_sums())
}

/// Weights proportional to nonnegative per-model scores; all-zero scores
/// give uniform weights.
pub fn weights_from_scores(scores: &[f64]) -> Result<SimplexWeights> {
    if scores.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return arg_err("scores must be finite and nonnegative");
    }
    if scores.iter().all(|s| *s == 0.0) {
        return SimplexWeights::uniform(scores.len());
    }
    SimplexWeights::from_unnormalized(scores.to_vec())
}

/// Training accuracy (classification) or `1 / (RMSE + 1e-12)` (regression)
/// per model, normalized.
pub fn weights_accuracy(data: &Dataset, predictors: &[BasePredictor]) -> Result<SimplexWeights> {
    let errors = pointwise_errors(data, predictors)?;
    let n = data.n() as f64;
    let scores: Vec<f64> = (0..predictors.len())
        .map(|j| {
            let col = errors.column(j);
            match data.task() {
                Task::Classification => 1.0 - col.sum() / n,
                Task::Regression => 1.0 / ((col.sum() / n).sqrt() + RMSE_EPS),
            }
        })
        .collect();
    weights_from_scores(&scores)
}

/// Per-row, per-model error: 0/1 misclassification of the argmax class, or
/// squared error for regressors.
pub fn pointwise_errors(data: &Dataset, predictors: &[BasePredictor]) -> Result<Array2<f64>> {
    if predictors.is_empty() {
        return arg_err("no predictors");
    }
    if let Some(p) = predictors.iter().find(|p| p.task() != data.task()) {
        return arg_err(format!("{} is a {} model, data is {}", p.name, p.task(), data.task()));
    }
    let mut out = Array2::zeros((data.n(), predictors.len()));
    for i in 0..data.n() {
        let x = data.row(i).to_vec();
        let y = data.labels().value(i);
        for (j, p) in predictors.iter().enumerate() {
            out[[i, j]] = match data.task() {
                Task::Classification => {
                    let pred = argmax(&p.class_probs(&x)?) as f64;
                    if pred == y {
                        0.0
                    } else {
                        1.0
                    }
                }
                Task::Regression => (p.predict(&x)? - y).powi(2),
            };
        }
    }
    Ok(out)
}

/// Mixture-of-experts objective `log Σ_j g_j(x) exp(ℓ_j)` with frozen experts.
pub struct MoeObjective<'a> {
    table: &'a LikelihoodTable,
}

impl<'a> MoeObjective<'a> {
    pub fn new(table: &'a LikelihoodTable) -> Self {
        Self { table }
    }
}

impl RowObjective for MoeObjective<'_> {
    fn rows(&self) -> usize {
        self.table.n()
    }

    fn models(&self) -> usize {
        self.table.m()
    }

    fn eval(&self, row: usize, logits: &[f64], dlogits: &mut [f64]) -> RowTerms {
        let ll = self.table.row(row);
        // log Σ g_j e^{ℓ_j} = lse(z + ℓ) − lse(z); gradient is r − g
        for (d, (z, l)) in dlogits.iter_mut().zip(logits.iter().zip(ll)) {
            *d = z + l;
        }
        let joint = lse_unchecked(dlogits);
        let gate = lse_unchecked(logits);
        for (d, z) in dlogits.iter_mut().zip(logits) {
            *d = (*d - joint).exp() - (z - gate).exp();
        }
        let value = joint - gate;
        RowTerms {
            objective: value,
            kl: 0.0,
            loglik: value,
        }
    }
}

/// Trains a gate of the posterior architecture on the induced mixture
/// likelihood. `cfg.lambda_kl` is ignored.
pub fn fit_moe(
    mut net: PosteriorNet,
    data: &Dataset,
    table: &LikelihoodTable,
    cfg: &TrainConfig,
) -> Result<(PosteriorNet, Vec<EpochStats>)> {
    if table.n() != data.n() {
        return arg_err(format!("table has {} rows, data {}", table.n(), data.n()));
    }
    let trace = posterior::train(&mut net, data.features(), &MoeObjective::new(table), cfg)?;
    Ok((net, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DlaConfig {
    pub k: usize,
    pub temperature: f64,
    pub smoothing: f64,
}

impl Default for DlaConfig {
    fn default() -> Self {
        Self {
            k: 50,
            temperature: 1.0,
            smoothing: 1.0,
        }
    }
}

impl DlaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("dla.k must be >= 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Validation("dla.temperature must be > 0".into()));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Validation("dla.smoothing must be >= 0".into()));
        }
        Ok(())
    }
}

/// Dynamic local accuracy: weights from each model's performance on the `k`
/// nearest training points in standardized feature space.
#[derive(Debug, Clone)]
pub struct DlaModel {
    cfg: DlaConfig,
    task: Task,
    /// Feature columns with nonzero training variance.
    kept: Vec<usize>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    train: Array2<f64>,
    errors: Array2<f64>,
}

impl DlaModel {
    pub fn fit(data: &Dataset, predictors: &[BasePredictor], cfg: DlaConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.k > data.n() {
            return arg_err(format!("dla.k = {} exceeds {} training rows", cfg.k, data.n()));
        }
        let errors = pointwise_errors(data, predictors)?;
        let mut kept = Vec::new();
        let mut mean = Vec::new();
        let mut sd = Vec::new();
        for c in 0..data.d() {
            let col = data.features().column(c).to_vec();
            let s = sample_sd(&col);
            if s > 0.0 {
                kept.push(c);
                mean.push(crate::math::mean(&col));
                sd.push(s);
            }
        }
        let mut model = Self {
            cfg,
            task: data.task(),
            kept,
            mean,
            sd,
            train: Array2::zeros((0, 0)),
            errors,
        };
        let rows: Vec<Vec<f64>> = (0..data.n())
            .map(|i| model.standardize(&data.row(i).to_vec()))
            .collect();
        model.train = Array2::from_shape_fn((data.n(), model.kept.len()), |(i, c)| rows[i][c]);
        Ok(model)
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .enumerate()
            .map(|(c, &col)| (x[col] - self.mean[c]) / self.sd[c])
            .collect()
    }

    /// Indices of the `k` nearest training rows; distance ties go to the lower index.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        let d = self.mean.len();
        let needed = self.kept.iter().max().map_or(0, |c| c + 1);
        if x.len() < needed {
            return arg_err(format!("query has {} features, need {needed}", x.len()));
        }
        let z = self.standardize(x);
        let mut dist: Vec<(f64, usize)> = self
            .train
            .outer_iter()
            .enumerate()
            .map(|(i, row)| {
                let s: f64 = (0..d).map(|c| (row[c] - z[c]).powi(2)).sum();
                (s, i)
            })
            .collect();
        let k = self.cfg.k;
        dist.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        let mut near: Vec<(f64, usize)> = dist[..k].to_vec();
        near.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        Ok(near.into_iter().map(|(_, i)| i).collect())
    }

    /// Local scores `(correct + α)/(k + 2α)` or `−local RMSE`.
    pub fn local_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let near = self.neighbours(x)?;
        let k = near.len() as f64;
        let a = self.cfg.smoothing;
        Ok((0..self.errors.ncols())
            .map(|j| {
                let err: f64 = near.iter().map(|&i| self.errors[[i, j]]).sum();
                match self.task {
                    Task::Classification => (k - err + a) / (k + 2.0 * a),
                    Task::Regression => -(err / k).sqrt(),
                }
            })
            .collect())
    }

    pub fn weights(&self, x: &[f64]) -> Result<SimplexWeights> {
        let s: Vec<f64> = self
            .local_scores(x)?
            .into_iter()
            .map(|v| v / self.cfg.temperature)
            .collect();
        softmax(&s)
    }
}

/// One-shot DLA weights for a single query.
pub fn weights_dla(
    train_data: &Dataset,
    predictors: &[BasePredictor],
    x: &[f64],
    cfg: DlaConfig,
) -> Result<SimplexWeights> {
    DlaModel::fit(train_data, predictors, cfg)?.weights(x)
}

/// Averaging methods selectable in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    BestSingle,
    Uniform,
    AccuracyWeighted,
    ClassicalBma,
    Moe(TrainConfig),
    Dla(DlaConfig),
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::BestSingle => "best_single",
            BaselineKind::Uniform => "uniform",
            BaselineKind::AccuracyWeighted => "accuracy_weighted",
            BaselineKind::ClassicalBma => "classical_bma",
            BaselineKind::Moe(_) => "moe",
            BaselineKind::Dla(_) => "dla",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineKind::Moe(cfg) => cfg.validate(),
            BaselineKind::Dla(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }
}

/// A fitted weighting rule `x ↦ α(x)`.
#[derive(Debug, Clone)]
pub enum Averager {
    Constant(SimplexWeights),
    Net(PosteriorNet),
    Dla(DlaModel),
}

impl Averager {
    pub fn weights(&self, x: &[f64]) -> Result<SimplexWeights> {
        match self {
            Averager::Constant(w) => Ok(w.clone()),
            Averager::Net(net) => net.forward(x),
            Averager::Dla(model) => model.weights(x),
        }
    }

    pub fn weights_for(&self, data: &Dataset) -> Result<Vec<SimplexWeights>> {
        (0..data.n()).map(|i| self.weights(&data.row(i).to_vec())).collect()
    }
}

/// Fits a baseline on training data. `seed` initializes the MoE gate.
pub fn fit_baseline(
    kind: &BaselineKind,
    data: &Dataset,
    table: &LikelihoodTable,
    predictors: &[BasePredictor],
    seed: u64,
) -> Result<Averager> {
    kind.validate()?;
    Ok(match kind {
        BaselineKind::BestSingle => Averager::Constant(weights_best_single(table)?),
        BaselineKind::Uniform => Averager::Constant(weights_uniform(table.m())?),
        BaselineKind::AccuracyWeighted => Averager::Constant(weights_accuracy(data, predictors)?),
        BaselineKind::ClassicalBma => Averager::Constant(weights_bma(table)?),
        BaselineKind::Moe(cfg) => {
            let net = PosteriorNet::new(data.d(), table.m(), seed)?;
            Averager::Net(fit_moe(net, data, table, cfg)?.0)
        }
        BaselineKind::Dla(cfg) => Averager::Dla(DlaModel::fit(data, predictors, *cfg)?),
    })
}
