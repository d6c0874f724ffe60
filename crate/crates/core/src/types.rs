//! Value types passed between predictors, prior, posterior and evaluation.

use std::ops::Index;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::{floor_log_prob, SIMPLEX_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Classification => f.write_str("classification"),
            Task::Regression => f.write_str("regression"),
        }
    }
}

/// Nonnegative weights over `m` models summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Validates a probability vector. Deviations within [`SIMPLEX_TOL`] are
    /// renormalized; anything larger is rejected.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("simplex weights need m >= 1".into()));
        }
        for (j, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() || *w < -SIMPLEX_TOL {
                return Err(Error::Validation(format!("weight {j} is invalid: {w}")));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Validation(format!("weights sum to {sum}, expected 1")));
        }
        if sum != 1.0 {
            for w in weights.iter_mut() {
                *w /= sum;
            }
        }
        Ok(Self(weights))
    }

    /// Normalizes arbitrary nonnegative scores.
    pub fn from_unnormalized(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return arg_err("scores must be finite and nonnegative");
        }
        let sum: f64 = scores.iter().sum();
        if sum <= 0.0 {
            return arg_err("scores have zero total mass");
        }
        Self::new(scores.into_iter().map(|s| s / sum).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return arg_err("uniform weights need m >= 1");
        }
        Ok(Self(vec![1.0 / m as f64; m]))
    }

    pub fn one_hot(m: usize, k: usize) -> Result<Self> {
        if k >= m {
            return arg_err(format!("one-hot index {k} out of range for m={m}"));
        }
        let mut w = vec![0.0; m];
        w[k] = 1.0;
        Ok(Self(w))
    }

    /// Wraps output of an internal softmax that is already normalized.
    pub(crate) fn from_softmax(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Argmax with lowest-index tie breaking.
    pub fn argmax(&self) -> usize {
        crate::math::argmax(&self.0)
    }

    /// Reorders entries so that `out[j] = self[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return arg_err("permutation length mismatch");
        }
        Self::new(perm.iter().map(|&p| self.0[p]).collect())
    }
}

impl Index<usize> for SimplexWeights {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Vec<f64> {
        w.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labels {
    Classes { values: Vec<usize>, num_classes: usize },
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes { values, .. } => values.len(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Labels::Classes { .. } => Task::Classification,
            Labels::Real(_) => Task::Regression,
        }
    }

    /// Label of row `i` as a real number (class index for classification).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Labels::Classes { values, .. } => values[i] as f64,
            Labels::Real(v) => v[i],
        }
    }

    fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Classes { values, num_classes } => Labels::Classes {
                values: idx.iter().map(|&i| values[i]).collect(),
                num_classes: *num_classes,
            },
            Labels::Real(v) => Labels::Real(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// A supervised dataset: `n × d` features, labels and optional region tags.
///
/// Region tags are carried for analysis only and never used as features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Labels,
    feature_names: Vec<String>,
    regions: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Labels) -> Result<Self> {
        let names = (0..features.ncols()).map(|c| format!("x{}", c + 1)).collect();
        Self::with_names(features, labels, names, None)
    }

    pub fn with_names(
        features: Array2<f64>,
        labels: Labels,
        feature_names: Vec<String>,
        regions: Option<Vec<i64>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return arg_err(format!("dataset needs n >= 1 and d >= 1, got {n}x{d}"));
        }
        if labels.len() != n {
            return arg_err(format!("{} labels for {n} rows", labels.len()));
        }
        if feature_names.len() != d {
            return arg_err("feature name count does not match columns");
        }
        match &labels {
            Labels::Classes { values, num_classes } => {
                if *num_classes < 2 {
                    return arg_err("classification needs at least 2 classes");
                }
                if let Some(bad) = values.iter().find(|&&c| c >= *num_classes) {
                    return arg_err(format!("class label {bad} >= num_classes {num_classes}"));
                }
            }
            Labels::Real(v) => {
                if v.iter().any(|y| !y.is_finite()) {
                    return arg_err("regression labels must be finite");
                }
            }
        }
        if let Some(r) = &regions {
            if r.len() != n {
                return arg_err(format!("{} region tags for {n} rows", r.len()));
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            regions,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn task(&self) -> Task {
        self.labels.task()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn regions(&self) -> Option<&[i64]> {
        self.regions.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.labels {
            Labels::Classes { num_classes, .. } => Some(*num_classes),
            Labels::Real(_) => None,
        }
    }

    pub fn class_labels(&self) -> Result<&[usize]> {
        match &self.labels {
            Labels::Classes { values, .. } => Ok(values),
            Labels::Real(_) => Err(Error::Task("expected classification labels".into())),
        }
    }

    pub fn real_labels(&self) -> Result<&[f64]> {
        match &self.labels {
            Labels::Real(v) => Ok(v),
            Labels::Classes { .. } => Err(Error::Task("expected regression labels".into())),
        }
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return arg_err(format!("row index {bad} out of range"));
        }
        let features = self.features.select(ndarray::Axis(0), idx);
        let regions = self
            .regions
            .as_ref()
            .map(|r| idx.iter().map(|&i| r[i]).collect());
        Self::with_names(
            features,
            self.labels.select(idx),
            self.feature_names.clone(),
            regions,
        )
    }

    /// Same rows with transformed features and labels; names and tags kept.
    pub(crate) fn map_parts(&self, features: Array2<f64>, labels: Labels) -> Result<Self> {
        Self::with_names(
            features,
            labels,
            self.feature_names.clone(),
            self.regions.clone(),
        )
    }
}

/// Per-example, per-model predictive log-likelihoods `log f_j(y_i | x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTable {
    loglik: Array2<f64>,
    names: Vec<String>,
}

impl LikelihoodTable {
    /// Builds a table, clamping every entry to the log-probability floor.
    pub fn new(mut loglik: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if loglik.ncols() != names.len() {
            return arg_err(format!(
                "{} model names for {} columns",
                names.len(),
                loglik.ncols()
            ));
        }
        if loglik.ncols() == 0 || loglik.nrows() == 0 {
            return arg_err("likelihood table must be nonempty");
        }
        if loglik.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return arg_err("likelihood table contains NaN or +inf");
        }
        loglik.mapv_inplace(floor_log_prob);
        Ok(Self { loglik, names })
    }

    pub fn n(&self) -> usize {
        self.loglik.nrows()
    }

    pub fn m(&self) -> usize {
        self.loglik.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn loglik(&self) -> &Array2<f64> {
        &self.loglik
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.loglik.row(i)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.loglik.sum_axis(ndarray::Axis(0)).to_vec()
    }

    /// Checks that every entry is a log-probability (`exp(entry) <= 1 + 1e-9`).
    pub fn check_probabilities(&self) -> Result<()> {
        let limit = (1.0 + SIMPLEX_TOL).ln();
        match self.loglik.iter().find(|v| **v > limit) {
            Some(v) => Err(Error::Validation(format!(
                "entry {v} is not a log-probability"
            ))),
            None => Ok(()),
        }
    }

    /// Columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.m() {
            return arg_err("permutation length mismatch");
        }
        let loglik = self.loglik.select(ndarray::Axis(1), perm);
        let names = perm.iter().map(|&p| self.names[p].clone()).collect();
        Self::new(loglik, names)
    }
}

/// Task-specific summary of the mixture predictive distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureOutput {
    /// Per-row class probabilities.
    ClassProbs(Vec<Vec<f64>>),
    /// Per-row predictive mean.
    Mean(Vec<f64>),
}

/// Ensemble predictive distribution `Σ_j α_j(x) f_j(y|x)` evaluated on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePrediction {
    pub weights: Vec<SimplexWeights>,
    /// Mixture log-likelihood of the true label per row.
    pub loglik: Vec<f64>,
    pub output: MixtureOutput,
}

impl MixturePrediction {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn mean_loglik(&self) -> f64 {
        crate::math::mean(&self.loglik)
    }
}
