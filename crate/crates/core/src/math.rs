//! Numerically stable primitives shared by the prior, posterior and baselines.

use crate::error::{arg_err, Result};
use crate::types::SimplexWeights;

/// Every stored log-probability is clamped to at least this value.
pub const LOG_PROB_FLOOR: f64 = -30.0;

/// Tolerance used when validating probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// `log(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Clamp a log-probability to [`LOG_PROB_FLOOR`]. NaN maps to the floor.
#[inline]
pub fn floor_log_prob(v: f64) -> f64 {
    if v.is_nan() {
        LOG_PROB_FLOOR
    } else {
        v.max(LOG_PROB_FLOOR)
    }
}

/// `log Σ exp(v)` with max subtraction.
///
/// Entries equal to `-inf` are allowed as long as one entry is finite.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return arg_err("log_sum_exp of an empty sequence");
    }
    if values.iter().any(|v| v.is_nan()) {
        return arg_err("log_sum_exp input contains NaN");
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return arg_err("log_sum_exp needs at least one finite entry");
    }
    if values.len() == 1 {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Infallible log-sum-exp for internal hot loops where inputs are known finite.
#[inline]
pub(crate) fn lse_unchecked(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() == 1 || !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax over energies, returned as validated simplex weights.
pub fn softmax(energies: &[f64]) -> Result<SimplexWeights> {
    if energies.is_empty() {
        return arg_err("softmax of an empty sequence");
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return arg_err("softmax input must be finite");
    }
    let mut out = vec![0.0; energies.len()];
    softmax_into(energies, &mut out);
    SimplexWeights::new(out)
}

/// Softmax written into `out`; inputs are assumed finite.
#[inline]
pub(crate) fn softmax_into(energies: &[f64], out: &mut [f64]) {
    let lse = lse_unchecked(energies);
    let mut sum = 0.0;
    for (o, e) in out.iter_mut().zip(energies) {
        *o = (e - lse).exp();
        sum += *o;
    }
    // exp(e - lse) sums to 1 up to rounding; renormalize away the residue.
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Mixture log-likelihood `log Σ_j w_j exp(ℓ_j)`; components with zero weight are skipped.
pub fn mixture_loglik(weights: &SimplexWeights, row_logliks: &[f64]) -> Result<f64> {
    if weights.len() != row_logliks.len() {
        return arg_err(format!(
            "mixture_loglik: {} weights vs {} log-likelihoods",
            weights.len(),
            row_logliks.len()
        ));
    }
    let terms: Vec<f64> = weights
        .as_slice()
        .iter()
        .zip(row_logliks)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| w.ln() + l)
        .collect();
    log_sum_exp(&terms)
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log σ(u)` without cancellation for large |u|.
#[inline]
pub fn log_sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        -(-u).exp().ln_1p()
    } else {
        u - u.exp().ln_1p()
    }
}

/// Log-density of `Normal(mean, sd²)` at `y`.
#[inline]
pub fn normal_log_density(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (denominator `n - 1`); zero for fewer than two values.
pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
