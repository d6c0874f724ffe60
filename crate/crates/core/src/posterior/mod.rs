//! Amortized variational posterior over model indices.
//!
//! A network `h_θ(x)` outputs `q_θ(J = j; x)` and is trained to maximize the
//! per-row ELBO
//!
//! ```text
//! L(θ; x, y) = Σ_j q_j log f_j(y|x) − λ_KL Σ_j q_j log(q_j / p_j)
//! ```
//!
//! where `p` is the adaptive prior of the row. The expectation is exact, so
//! gradients flow analytically through softmax, affine layers and ReLUs.

mod network;

pub use network::{LayerDoc, NetDocument, OutputInit, PosteriorNet, DEFAULT_HIDDEN, NET_FORMAT_VERSION};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::{lse_unchecked, softmax_into};
use crate::types::{Dataset, LikelihoodTable, SimplexWeights};

use network::{Activations, Adam};

/// Smallest prior probability entering `log(q / p)`.
pub const PRIOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_kl: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Seeds per-epoch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 10,
            lambda_kl: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.lambda_kl >= 0.0 && self.lambda_kl.is_finite()) {
            return bad("lambda_kl must be >= 0");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam moment decay rates must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("Adam epsilon must be > 0");
        }
        Ok(())
    }
}

/// Single-row ELBO `Σ q ℓ − λ KL(q ‖ p)` with `0 log 0 = 0` and prior
/// entries floored at [`PRIOR_FLOOR`].
pub fn elbo(
    q: &SimplexWeights,
    row_logliks: &[f64],
    prior: &SimplexWeights,
    lambda_kl: f64,
) -> Result<f64> {
    let m = q.len();
    if row_logliks.len() != m || prior.len() != m {
        return arg_err(format!(
            "elbo: q has {m} entries, log-likelihoods {}, prior {}",
            row_logliks.len(),
            prior.len()
        ));
    }
    let expected: f64 = q.as_slice().iter().zip(row_logliks).map(|(a, l)| a * l).sum();
    Ok(expected - lambda_kl * kl_divergence(q, prior)?)
}

/// `KL(q ‖ p)` with the same conventions as [`elbo`].
pub fn kl_divergence(q: &SimplexWeights, p: &SimplexWeights) -> Result<f64> {
    if q.len() != p.len() {
        return arg_err("kl_divergence: length mismatch");
    }
    Ok(q.as_slice()
        .iter()
        .zip(p.as_slice())
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a.ln() - b.max(PRIOR_FLOOR).ln()))
        .sum())
}

/// Per-row objective terms reported in the loss trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RowTerms {
    /// The maximized quantity.
    pub objective: f64,
    pub kl: f64,
    /// Expected log-likelihood under `q` (ELBO) or mixture log-likelihood (MoE).
    pub loglik: f64,
}

/// A per-row objective of the network logits, to be maximized.
pub trait RowObjective: Sync {
    fn rows(&self) -> usize;
    fn models(&self) -> usize;
    /// Returns the row's terms and writes `∂objective/∂logits` into `dlogits`.
    fn eval(&self, row: usize, logits: &[f64], dlogits: &mut [f64]) -> RowTerms;
}

/// The ELBO of every training row against fixed per-row priors.
pub struct ElboObjective<'a> {
    table: &'a LikelihoodTable,
    log_priors: Array2<f64>,
    lambda_kl: f64,
}

impl<'a> ElboObjective<'a> {
    pub fn new(
        table: &'a LikelihoodTable,
        priors: &[SimplexWeights],
        lambda_kl: f64,
    ) -> Result<Self> {
        if priors.len() != table.n() {
            return arg_err(format!("{} priors for {} rows", priors.len(), table.n()));
        }
        if let Some(p) = priors.iter().find(|p| p.len() != table.m()) {
            return arg_err(format!("prior of length {} for {} models", p.len(), table.m()));
        }
        let log_priors = Array2::from_shape_fn((table.n(), table.m()), |(i, j)| {
            priors[i][j].max(PRIOR_FLOOR).ln()
        });
        Ok(Self {
            table,
            log_priors,
            lambda_kl,
        })
    }
}

impl RowObjective for ElboObjective<'_> {
    fn rows(&self) -> usize {
        self.table.n()
    }

    fn models(&self) -> usize {
        self.table.m()
    }

    fn eval(&self, row: usize, logits: &[f64], dlogits: &mut [f64]) -> RowTerms {
        let lse = lse_unchecked(logits);
        let ll = self.table.row(row);
        let lp = self.log_priors.row(row);
        let mut expected = 0.0;
        let mut kl = 0.0;
        // g_j = ∂L/∂q_j up to an additive constant, which the softmax Jacobian removes
        let mut g_bar = 0.0;
        for j in 0..logits.len() {
            let log_q = logits[j] - lse;
            let q = log_q.exp();
            let g = ll[j] - self.lambda_kl * (log_q - lp[j]);
            expected += q * ll[j];
            kl += q * (log_q - lp[j]);
            g_bar += q * g;
            dlogits[j] = g;
        }
        for j in 0..logits.len() {
            let q = (logits[j] - lse).exp();
            dlogits[j] = q * (dlogits[j] - g_bar);
        }
        RowTerms {
            objective: expected - self.lambda_kl * kl,
            kl,
            loglik: expected,
        }
    }
}

/// Mean terms over one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_objective: f64,
    pub mean_kl: f64,
    pub mean_loglik: f64,
}

/// Loss trace as CSV `epoch,mean_elbo,mean_kl,mean_loglik`.
pub fn trace_csv(trace: &[EpochStats]) -> String {
    let mut s = String::from("epoch,mean_elbo,mean_kl,mean_loglik\n");
    for e in trace {
        s.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.mean_objective, e.mean_kl, e.mean_loglik
        ));
    }
    s
}

fn check_alignment(net: &PosteriorNet, features: &Array2<f64>, objective: &dyn RowObjective) -> Result<()> {
    if features.nrows() != objective.rows() {
        return arg_err(format!(
            "{} feature rows but the objective has {} rows",
            features.nrows(),
            objective.rows()
        ));
    }
    if features.ncols() != net.inputs() {
        return arg_err(format!(
            "network expects {} inputs, features have {}",
            net.inputs(),
            features.ncols()
        ));
    }
    if net.outputs() != objective.models() {
        return arg_err(format!(
            "network has {} outputs for {} models",
            net.outputs(),
            objective.models()
        ));
    }
    Ok(())
}

/// Mean objective and its gradient over `rows`. Accumulation is sequential
/// in row order, so results are bit-reproducible.
pub(crate) fn batch_gradient(
    net: &PosteriorNet,
    features: &Array2<f64>,
    objective: &dyn RowObjective,
    rows: &[usize],
    grad: &mut [f64],
    cache: &mut Activations,
) -> RowTerms {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut dlogits = vec![0.0; net.outputs()];
    let mut sum = RowTerms::default();
    let mut x = vec![0.0; net.inputs()];
    for &i in rows {
        for (dst, src) in x.iter_mut().zip(features.row(i)) {
            *dst = *src;
        }
        net.forward_into(&x, cache);
        let t = objective.eval(i, cache.logits(), &mut dlogits);
        sum.objective += t.objective;
        sum.kl += t.kl;
        sum.loglik += t.loglik;
        net.backward_into(cache, &dlogits, grad);
    }
    let scale = 1.0 / rows.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    RowTerms {
        objective: sum.objective * scale,
        kl: sum.kl * scale,
        loglik: sum.loglik * scale,
    }
}

/// Mean terms over all rows at the current parameters.
pub fn evaluate(
    net: &PosteriorNet,
    features: &Array2<f64>,
    objective: &dyn RowObjective,
) -> Result<RowTerms> {
    check_alignment(net, features, objective)?;
    let mut cache = Activations::default();
    let mut dlogits = vec![0.0; net.outputs()];
    let mut sum = RowTerms::default();
    for i in 0..features.nrows() {
        net.forward_into(&features.row(i).to_vec(), &mut cache);
        let t = objective.eval(i, cache.logits(), &mut dlogits);
        sum.objective += t.objective;
        sum.kl += t.kl;
        sum.loglik += t.loglik;
    }
    let n = features.nrows() as f64;
    Ok(RowTerms {
        objective: sum.objective / n,
        kl: sum.kl / n,
        loglik: sum.loglik / n,
    })
}

/// Minibatch Adam ascent on the mean objective. Rows are reshuffled every
/// epoch from `cfg.seed`; batch size `n` gives full-batch gradient ascent.
/// Returns the mean terms after each epoch.
pub fn train(
    net: &mut PosteriorNet,
    features: &Array2<f64>,
    objective: &dyn RowObjective,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    check_alignment(net, features, objective)?;
    let n = features.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        net.param_count(),
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let mut grad = vec![0.0; net.param_count()];
    let mut cache = Activations::default();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let terms = batch_gradient(net, features, objective, batch, &mut grad, &mut cache);
            if !terms.objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite objective in epoch {epoch}, batch {b} (rows {:?}…)",
                    &batch[..batch.len().min(4)]
                )));
            }
            // ascent on the objective = descent on its negation
            grad.iter_mut().for_each(|g| *g = -*g);
            adam.step(net.params_mut(), &grad);
        }
        let t = evaluate(net, features, objective)?;
        trace.push(EpochStats {
            epoch,
            mean_objective: t.objective,
            mean_kl: t.kl,
            mean_loglik: t.loglik,
        });
    }
    Ok(trace)
}

/// Trained posterior plus its per-epoch ELBO trace.
#[derive(Debug, Clone)]
pub struct TrainedPosterior {
    pub net: PosteriorNet,
    pub trace: Vec<EpochStats>,
}

/// Trains `net` on the ELBO of `data` given precomputed log-likelihoods and priors.
pub fn train_posterior(
    mut net: PosteriorNet,
    data: &Dataset,
    table: &LikelihoodTable,
    priors: &[SimplexWeights],
    cfg: &TrainConfig,
) -> Result<TrainedPosterior> {
    if table.n() != data.n() {
        return arg_err(format!("table has {} rows, data {}", table.n(), data.n()));
    }
    let objective = ElboObjective::new(table, priors, cfg.lambda_kl)?;
    let trace = train(&mut net, data.features(), &objective, cfg)?;
    Ok(TrainedPosterior { net, trace })
}

/// Mixture weights `α(x) = q_θ̂(·; x)` used for prediction.
pub fn assign_weights(net: &PosteriorNet, x: &[f64]) -> Result<SimplexWeights> {
    net.forward(x)
}

/// Central finite-difference check of the analytic gradient of the mean
/// objective over `rows`. Returns the largest coordinate-wise relative error
/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(
    net: &PosteriorNet,
    features: &Array2<f64>,
    objective: &dyn RowObjective,
    rows: &[usize],
) -> Result<f64> {
    const STEP: f64 = 1e-5;
    check_alignment(net, features, objective)?;
    if rows.is_empty() {
        return arg_err("grad_check needs at least one row");
    }
    let mut analytic = vec![0.0; net.param_count()];
    let mut cache = Activations::default();
    batch_gradient(net, features, objective, rows, &mut analytic, &mut cache);
    let mut probe = net.clone();
    let mut scratch = vec![0.0; net.param_count()];
    let mut worst: f64 = 0.0;
    for k in 0..net.param_count() {
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + STEP;
        let up = batch_gradient(&probe, features, objective, rows, &mut scratch, &mut cache).objective;
        probe.params_mut()[k] = orig - STEP;
        let down = batch_gradient(&probe, features, objective, rows, &mut scratch, &mut cache).objective;
        probe.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Seeded random problem for gradient checks: `rows × inputs` features in
/// `[−2, 2)`, log-likelihoods in `[−4, −0.01)` and random priors.
pub fn check_instance(
    rows: usize,
    inputs: usize,
    models: usize,
    seed: u64,
) -> Result<(Array2<f64>, LikelihoodTable, Vec<SimplexWeights>)> {
    use rand::Rng;
    if rows == 0 || inputs == 0 || models == 0 {
        return arg_err("check instance needs rows, inputs and models >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((rows, inputs), |_| rng.random_range(-2.0..2.0));
    let ll = Array2::from_shape_fn((rows, models), |_| rng.random_range(-4.0..-0.01));
    let table = LikelihoodTable::new(ll, (0..models).map(|j| format!("m{j}")).collect())?;
    let priors = (0..rows)
        .map(|_| SimplexWeights::from_unnormalized((0..models).map(|_| rng.random_range(0.05..1.0)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((x, table, priors))
}

/// Softmax of a logit vector (exposed for diagnostics).
pub fn softmax_logits(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}
