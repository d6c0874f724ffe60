//! Input-adaptive energy prior over candidate predictors.
//!
//! The energy of model `j` given training covariates `x_1..x_n` and a query
//! `x` is a sum of per-point terms `e_j(x_i) + e_j(x)`, where each term
//! integrates the model's log predictive density over the outcome space:
//!
//! * discrete outcomes: `e_j(x) = Σ_y log p(y | x, f_j)`, exact;
//! * continuous outcomes: `e_j(x) = (1/K) Σ_k log N(y_k; ŷ_j(x), 1)` with `K`
//!   outcomes drawn uniformly from `[y_min, y_max]`, shared by every point
//!   and model.
//!
//! The prior is the softmax of the total energy over models.
//!
//! For the leave-one-out prior used in training, removing `x_i` from the
//! training term and reinserting it as the query cancels exactly, so every
//! row sees `softmax(totals)`. [`EnergyCache::loo_prior_recompute`] keeps the
//! explicit drop-and-add path for checking that shortcut.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::{floor_log_prob, log_sigmoid, normal_log_density, sigmoid, softmax_into};
use crate::predictors::BasePredictor;
use crate::types::{SimplexWeights, Task};

/// Default number of Monte-Carlo outcome samples.
pub const DEFAULT_MC_SAMPLES: usize = 64;

/// Shared outcome samples for the continuous-outcome energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub k: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub seed: u64,
    samples: Vec<f64>,
}

impl MonteCarlo {
    /// Draws `k` outcomes uniformly from `[y_min, y_max)` with ChaCha8 seeded by `seed`.
    pub fn draw(k: usize, y_min: f64, y_max: f64, seed: u64) -> Result<Self> {
        if k == 0 {
            return arg_err("Monte-Carlo prior needs K >= 1");
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return arg_err(format!("invalid integration range [{y_min}, {y_max}]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..k).map(|_| rng.random_range(y_min..y_max)).collect();
        Ok(Self {
            k,
            y_min,
            y_max,
            seed,
            samples,
        })
    }

    /// Range `[min − sd, max + sd]` of the training labels.
    pub fn default_range(labels: &[f64]) -> Result<(f64, f64)> {
        if labels.len() < 2 {
            return arg_err("need at least 2 labels to derive an integration range");
        }
        let min = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let max = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sd = crate::math::sample_sd(labels);
        let pad = if sd > 0.0 { sd } else { 1.0 };
        Ok((min - pad, max + pad))
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    Discrete { num_classes: usize },
    Continuous(MonteCarlo),
}

/// `Σ_y log p(y | x, f)` over `num_classes` outcomes, each term floored.
pub fn point_energy_discrete(
    predictor: &BasePredictor,
    x: &[f64],
    num_classes: usize,
) -> Result<f64> {
    if predictor.task() != Task::Classification {
        return Err(Error::Task(format!(
            "{} is not a classifier",
            predictor.name
        )));
    }
    if num_classes < 2 {
        return arg_err("discrete energy needs at least 2 classes");
    }
    let lp = predictor.class_log_probs(x)?;
    if lp.len() != num_classes {
        return Err(Error::Task(format!(
            "{} predicts {} classes, expected {num_classes}",
            predictor.name,
            lp.len()
        )));
    }
    Ok(lp.iter().sum())
}

/// Average unit-variance Normal log-density of the samples around `ŷ(x)`.
pub fn point_energy_continuous(
    predictor: &BasePredictor,
    x: &[f64],
    samples: &[f64],
) -> Result<f64> {
    if predictor.task() != Task::Regression {
        return Err(Error::Task(format!("{} is not a regressor", predictor.name)));
    }
    if samples.is_empty() {
        return arg_err("continuous energy needs at least one outcome sample");
    }
    let mean = predictor.predict(x)?;
    Ok(mc_average(mean, samples))
}

fn mc_average(mean: f64, samples: &[f64]) -> f64 {
    samples
        .iter()
        .map(|y| normal_log_density(*y, mean, 1.0))
        .sum::<f64>()
        / samples.len() as f64
}

/// Per-point energies `e_ij` and their column totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCache {
    energies: Array2<f64>,
    totals: Vec<f64>,
    mode: EnergyMode,
}

impl EnergyCache {
    /// Evaluates every training point under every predictor. Rows are
    /// computed in parallel; the result does not depend on thread count.
    pub fn build(
        predictors: &[BasePredictor],
        features: &Array2<f64>,
        mode: EnergyMode,
    ) -> Result<Self> {
        if predictors.is_empty() {
            return arg_err("energy cache needs at least one predictor");
        }
        let rows: Vec<Vec<f64>> = (0..features.nrows())
            .into_par_iter()
            .map(|i| {
                let x = features.row(i).to_vec();
                point_energies(predictors, &x, &mode)
            })
            .collect::<Result<_>>()?;
        let m = predictors.len();
        let energies = Array2::from_shape_fn((rows.len(), m), |(i, j)| rows[i][j]);
        Self::from_energies(energies, mode)
    }

    /// Wraps precomputed energies.
    pub fn from_energies(energies: Array2<f64>, mode: EnergyMode) -> Result<Self> {
        if energies.ncols() == 0 {
            return arg_err("energy cache needs at least one model");
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return arg_err("energies must be finite");
        }
        let totals = energies.sum_axis(Axis(0)).to_vec();
        Ok(Self {
            energies,
            totals,
            mode,
        })
    }

    pub fn n(&self) -> usize {
        self.energies.nrows()
    }

    pub fn m(&self) -> usize {
        self.energies.ncols()
    }

    pub fn energies(&self) -> &Array2<f64> {
        &self.energies
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    pub fn mode(&self) -> &EnergyMode {
        &self.mode
    }

    /// Query-point energies under the cache's mode (same MC samples).
    pub fn query_energies(&self, predictors: &[BasePredictor], x: &[f64]) -> Result<Vec<f64>> {
        if predictors.len() != self.m() {
            return arg_err(format!(
                "{} predictors for a {}-model cache",
                predictors.len(),
                self.m()
            ));
        }
        point_energies(predictors, x, &self.mode)
    }

    /// `p(J = j | x_1..x_n, x) = softmax_j(totals_j + query_j)`.
    pub fn adaptive_prior(&self, query_energies: &[f64]) -> Result<SimplexWeights> {
        if query_energies.len() != self.m() {
            return arg_err(format!(
                "{} query energies for {} models",
                query_energies.len(),
                self.m()
            ));
        }
        let e: Vec<f64> = self
            .totals
            .iter()
            .zip(query_energies)
            .map(|(t, q)| t + q)
            .collect();
        stable_softmax(&e)
    }

    /// Prior for a new input `x`.
    pub fn prior_at(&self, predictors: &[BasePredictor], x: &[f64]) -> Result<SimplexWeights> {
        let q = self.query_energies(predictors, x)?;
        self.adaptive_prior(&q)
    }

    /// Leave-one-out prior for training row `i`, via the cancellation shortcut.
    pub fn loo_prior(&self, i: usize) -> Result<SimplexWeights> {
        self.check_index(i)?;
        stable_softmax(&self.totals)
    }

    /// Leave-one-out prior computed the long way: build the cache without
    /// row `i`, then add row `i` back as the query.
    pub fn loo_prior_recompute(&self, i: usize) -> Result<SimplexWeights> {
        self.check_index(i)?;
        let keep: Vec<usize> = (0..self.n()).filter(|&r| r != i).collect();
        let reduced = Self::from_energies(self.energies.select(Axis(0), &keep), self.mode.clone())?;
        reduced.adaptive_prior(&self.energies.row(i).to_vec())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return arg_err(format!("row {i} out of range for {} cached points", self.n()));
        }
        Ok(())
    }
}

fn point_energies(predictors: &[BasePredictor], x: &[f64], mode: &EnergyMode) -> Result<Vec<f64>> {
    predictors
        .iter()
        .map(|p| match mode {
            EnergyMode::Discrete { num_classes } => point_energy_discrete(p, x, *num_classes),
            EnergyMode::Continuous(mc) => point_energy_continuous(p, x, mc.samples()),
        })
        .collect()
}

fn stable_softmax(e: &[f64]) -> Result<SimplexWeights> {
    if e.iter().any(|v| !v.is_finite()) {
        return arg_err("prior energies must be finite");
    }
    let mut out = vec![0.0; e.len()];
    softmax_into(e, &mut out);
    Ok(SimplexWeights::from_softmax(out))
}

/// `ℓ(β, x) = log σ(βx) + log(1 − σ(βx))`: the discrete energy of a
/// one-dimensional logistic model `p(y=1|x) = σ(βx)`.
pub fn logistic_energy(beta: f64, x: f64) -> f64 {
    let u = beta * x;
    floor_log_prob(log_sigmoid(u)) + floor_log_prob(log_sigmoid(-u))
}

/// Two logistic models with slopes `beta1`, `beta2` and a fixed training
/// log-odds `C_1 − C_2`; returns `(x, p(J=1 | ·, x))` over the grid.
pub fn bernoulli_demo(
    beta1: f64,
    beta2: f64,
    baseline_logodds: f64,
    x_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(beta1.is_finite() && beta2.is_finite() && baseline_logodds.is_finite()) {
        return arg_err("demo parameters must be finite");
    }
    x_grid
        .iter()
        .map(|&x| {
            if !x.is_finite() {
                return arg_err("demo grid must be finite");
            }
            let logodds = baseline_logodds + logistic_energy(beta1, x) - logistic_energy(beta2, x);
            Ok((x, sigmoid(logodds)))
        })
        .collect()
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(lo.is_finite() && hi.is_finite()) {
        return arg_err("linspace needs steps >= 1 and finite bounds");
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let span = hi - lo;
    Ok((0..steps)
        .map(|i| lo + span * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Plot-ready CSV with header `x,p_j1`.
pub fn demo_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("x,p_j1\n");
    for (x, p) in rows {
        s.push_str(&format!("{x},{p}\n"));
    }
    s
}
