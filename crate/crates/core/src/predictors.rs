//! Desk-scale base predictors and the likelihood table they feed.
//!
//! Classifiers are binary and return class probabilities; regressors return a
//! point prediction plus a Gaussian noise scale fitted on the training data.

use log::warn;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::{floor_log_prob, log_sigmoid, normal_log_density, sigmoid};
use crate::types::{Dataset, LikelihoodTable, Task};

/// Version tag of the serialized predictor document.
pub const PREDICTORS_FORMAT_VERSION: u32 = 1;

const LOGREG_GRAD_TOL: f64 = 1e-6;
const LOGREG_MAX_ITER: usize = 500;
const SIGMA_FLOOR: f64 = 1e-3;
const KNN_EPS: f64 = 1e-12;
const LDA_JITTER: f64 = 1e-6;

/// What to fit: the configuration-side description of a base predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    PolyLogreg { degree: usize },
    Lda,
    SoftCircle { center: [f64; 2], radius: f64, gamma: f64 },
    Ridge { alpha: f64 },
    KnnReg { k: usize },
}

impl ModelSpec {
    pub fn task(&self) -> Task {
        match self {
            ModelSpec::PolyLogreg { .. } | ModelSpec::Lda | ModelSpec::SoftCircle { .. } => {
                Task::Classification
            }
            ModelSpec::Ridge { .. } | ModelSpec::KnnReg { .. } => Task::Regression,
        }
    }

    fn default_name(&self) -> String {
        match self {
            ModelSpec::PolyLogreg { degree } => format!("poly_logreg_d{degree}"),
            ModelSpec::Lda => "lda".into(),
            ModelSpec::SoftCircle { gamma, .. } => format!("soft_circle_g{gamma}"),
            ModelSpec::Ridge { alpha } => format!("ridge_a{alpha}"),
            ModelSpec::KnnReg { k } => format!("knn_k{k}"),
        }
    }
}

/// A roster entry: model spec plus optional display name and feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub model: ModelSpec,
    /// Feature columns (by name) the predictor sees; all columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

impl PredictorSpec {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            name: None,
            model,
            columns: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.model.default_name())
    }
}

/// Roster used for the two-region simulation: two polynomial logistic
/// regressions, LDA, and two soft-circle models around `(0.8 t, 0)`.
pub fn simulation_roster(offset: f64) -> Vec<PredictorSpec> {
    let center = [0.8 * offset, 0.0];
    vec![
        PredictorSpec::new(ModelSpec::PolyLogreg { degree: 2 }),
        PredictorSpec::new(ModelSpec::PolyLogreg { degree: 3 }),
        PredictorSpec::new(ModelSpec::Lda),
        PredictorSpec::new(ModelSpec::SoftCircle {
            center,
            radius: 1.0,
            gamma: 5.0,
        }),
        PredictorSpec::new(ModelSpec::SoftCircle {
            center,
            radius: 1.0,
            gamma: 4.0,
        }),
    ]
}

/// Default regression roster for CSV runs.
pub fn regression_roster() -> Vec<PredictorSpec> {
    vec![
        PredictorSpec::new(ModelSpec::Ridge { alpha: 0.05 }),
        PredictorSpec::new(ModelSpec::KnnReg { k: 3 }),
        PredictorSpec::new(ModelSpec::KnnReg { k: 15 }),
    ]
}

/// Fitted parameters per predictor kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    PolyLogreg {
        degree: usize,
        /// Intercept first, then one coefficient per expanded monomial.
        weights: Vec<f64>,
        converged: bool,
    },
    Lda {
        coef: Vec<f64>,
        intercept: f64,
        class_priors: [f64; 2],
    },
    SoftCircle {
        center: [f64; 2],
        radius: f64,
        gamma: f64,
    },
    Ridge {
        intercept: f64,
        coef: Vec<f64>,
        sigma: f64,
    },
    KnnReg {
        k: usize,
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
        sigma: f64,
    },
}

/// A fitted base predictor `f_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePredictor {
    pub name: String,
    /// Indices into the dataset's feature columns; `None` means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<usize>>,
    pub model: Model,
}

impl BasePredictor {
    pub fn task(&self) -> Task {
        match self.model {
            Model::PolyLogreg { .. } | Model::Lda { .. } | Model::SoftCircle { .. } => {
                Task::Classification
            }
            Model::Ridge { .. } | Model::KnnReg { .. } => Task::Regression,
        }
    }

    /// Regression noise scale σ.
    pub fn sigma(&self) -> Option<f64> {
        match self.model {
            Model::Ridge { sigma, .. } | Model::KnnReg { sigma, .. } => Some(sigma),
            _ => None,
        }
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.columns {
            None => Ok(x.to_vec()),
            Some(cols) => cols
                .iter()
                .map(|&c| {
                    x.get(c).copied().ok_or_else(|| {
                        Error::Argument(format!("{}: input has no column {c}", self.name))
                    })
                })
                .collect(),
        }
    }

    /// Log-odds of class 1 for binary classifiers.
    pub fn log_odds(&self, x: &[f64]) -> Result<f64> {
        let x = self.project(x)?;
        match &self.model {
            Model::PolyLogreg {
                degree, weights, ..
            } => {
                let phi = poly_expand(&x, *degree);
                if phi.len() + 1 != weights.len() {
                    return arg_err(format!(
                        "{}: expected {} inputs",
                        self.name,
                        n_inputs_for(weights.len() - 1, *degree)
                    ));
                }
                Ok(weights[0] + dot(&weights[1..], &phi))
            }
            Model::Lda {
                coef, intercept, ..
            } => {
                if coef.len() != x.len() {
                    return arg_err(format!("{}: expected {} inputs", self.name, coef.len()));
                }
                Ok(intercept + dot(coef, &x))
            }
            Model::SoftCircle {
                center,
                radius,
                gamma,
            } => Ok(soft_circle_logit(&x, *center, *radius, *gamma)?),
            _ => Err(Error::Task(format!("{} is a regressor", self.name))),
        }
    }

    /// Class probabilities `[p(y=0|x), p(y=1|x)]`.
    pub fn class_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.log_odds(x)?;
        let p1 = sigmoid(u);
        Ok(vec![1.0 - p1, p1])
    }

    /// Floored class log-probabilities, computed in the log domain.
    pub fn class_log_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.log_odds(x)?;
        Ok(vec![
            floor_log_prob(log_sigmoid(-u)),
            floor_log_prob(log_sigmoid(u)),
        ])
    }

    /// Point prediction of a regressor.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let x = self.project(x)?;
        match &self.model {
            Model::Ridge {
                intercept, coef, ..
            } => {
                if coef.len() != x.len() {
                    return arg_err(format!("{}: expected {} inputs", self.name, coef.len()));
                }
                Ok(intercept + dot(coef, &x))
            }
            Model::KnnReg {
                k,
                train_x,
                train_y,
                ..
            } => knn_predict(train_x, train_y, &x, *k, None),
            _ => Err(Error::Task(format!("{} is a classifier", self.name))),
        }
    }

    /// Floored `log f(y | x)`.
    pub fn log_likelihood(&self, x: &[f64], y: f64) -> Result<f64> {
        match self.task() {
            Task::Classification => {
                let lp = self.class_log_probs(x)?;
                let c = y as usize;
                if y < 0.0 || y.fract() != 0.0 || c >= lp.len() {
                    return arg_err(format!("{}: label {y} is not a binary class", self.name));
                }
                Ok(lp[c])
            }
            Task::Regression => {
                let mean = self.predict(x)?;
                let sigma = self.sigma().expect("regressors carry sigma");
                Ok(floor_log_prob(normal_log_density(y, mean, sigma)))
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn n_inputs_for(n_features: usize, degree: usize) -> usize {
    (1..=8)
        .find(|&d| poly_feature_count(d, degree) == n_features)
        .unwrap_or(0)
}

/// Number of monomials of total degree 1..=`degree` in `d` variables.
pub fn poly_feature_count(d: usize, degree: usize) -> usize {
    // C(d + degree, degree) - 1
    let mut c = 1usize;
    for i in 1..=degree {
        c = c * (d + i) / i;
    }
    c - 1
}

/// All monomials of total degree 1..=`degree`, without the constant term.
///
/// Ordered by degree, then by nondecreasing variable index tuples.
pub fn poly_expand(x: &[f64], degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(poly_feature_count(x.len(), degree));
    // products of the previous degree, tagged with their largest variable index
    let mut prev: Vec<(usize, f64)> = vec![(0, 1.0)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for &(start, v) in &prev {
            for (j, xj) in x.iter().enumerate().skip(start) {
                next.push((j, v * xj));
            }
        }
        out.extend(next.iter().map(|(_, v)| *v));
        prev = next;
    }
    out
}

fn soft_circle_logit(x: &[f64], center: [f64; 2], radius: f64, gamma: f64) -> Result<f64> {
    if x.len() != 2 {
        return arg_err(format!("soft circle needs 2-D input, got {}", x.len()));
    }
    let dist = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
    Ok(gamma * (radius - dist))
}

/// `σ(γ (R − ‖x − c‖))`.
pub fn eval_soft_circle(x: &[f64], center: [f64; 2], radius: f64, gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return arg_err("soft circle gamma must be positive");
    }
    Ok(sigmoid(soft_circle_logit(x, center, radius, gamma)?))
}

fn check_features(data: &Dataset) -> Result<()> {
    if data.features().iter().any(|v| !v.is_finite()) {
        return arg_err("features contain NaN or infinite values");
    }
    Ok(())
}

fn binary_labels(data: &Dataset) -> Result<Vec<f64>> {
    let labels = data.class_labels()?;
    if data.num_classes() != Some(2) {
        return Err(Error::Task(format!(
            "binary classifier needs 2 classes, dataset has {}",
            data.num_classes().unwrap_or(0)
        )));
    }
    Ok(labels.iter().map(|&c| c as f64).collect())
}

fn rows(features: &Array2<f64>) -> Vec<Vec<f64>> {
    features.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn logistic_nll(z: &DMatrix<f64>, y: &[f64], w: &DVector<f64>) -> f64 {
    let u = z * w;
    let n = y.len() as f64;
    u.iter()
        .zip(y)
        .map(|(ui, yi)| -(yi * log_sigmoid(*ui) + (1.0 - yi) * log_sigmoid(-*ui)))
        .sum::<f64>()
        / n
}

/// Solves `(a + jitter I) x = b` with Cholesky, escalating the jitter on failure.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, base_jitter: f64) -> Option<DVector<f64>> {
    let scale = (a.trace() / a.nrows() as f64).abs().max(1e-300);
    let mut jitter = 0.0;
    for attempt in 0..8 {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        jitter = base_jitter * scale * 10f64.powi(attempt);
    }
    None
}

/// Logistic regression on the polynomial expansion (plus an intercept), fitted
/// by Newton's method with backtracking until the mean-gradient norm drops to
/// `1e-6` or 500 iterations pass.
pub fn fit_poly_logreg(data: &Dataset, degree: usize) -> Result<BasePredictor> {
    fit_poly_logreg_on(data, degree, None, format!("poly_logreg_d{degree}"))
}

fn fit_poly_logreg_on(
    data: &Dataset,
    degree: usize,
    columns: Option<Vec<usize>>,
    name: String,
) -> Result<BasePredictor> {
    if !(1..=3).contains(&degree) {
        return arg_err(format!("polynomial degree must be 1, 2 or 3, got {degree}"));
    }
    check_features(data)?;
    let y = binary_labels(data)?;
    let x = project_rows(data, columns.as_deref());
    let n = x.len();
    let p = poly_feature_count(x[0].len(), degree) + 1;
    if n < p {
        return arg_err(format!("need more than {} rows for degree {degree}", p - 1));
    }
    let mut z = DMatrix::<f64>::zeros(n, p);
    for (i, xi) in x.iter().enumerate() {
        z[(i, 0)] = 1.0;
        for (j, v) in poly_expand(xi, degree).into_iter().enumerate() {
            z[(i, j + 1)] = v;
        }
    }
    let yv = DVector::from_column_slice(&y);
    let mut w = DVector::<f64>::zeros(p);
    let mut loss = logistic_nll(&z, &y, &w);
    let mut converged = false;
    for _ in 0..LOGREG_MAX_ITER {
        let u = &z * &w;
        let prob = u.map(sigmoid);
        let grad = z.transpose() * (&prob - &yv) / n as f64;
        if grad.norm() <= LOGREG_GRAD_TOL {
            converged = true;
            break;
        }
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let s = prob[i] * (1.0 - prob[i]);
            if s == 0.0 {
                continue;
            }
            let row = z.row(i);
            hess.ger(s / n as f64, &row.transpose(), &row.transpose(), 1.0);
        }
        let Some(step) = solve_spd(&hess, &grad, 1e-10) else {
            warn!("poly_logreg degree {degree}: singular Hessian, returning best iterate");
            break;
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &w - &step * t;
            let cand_loss = logistic_nll(&z, &y, &cand);
            if cand_loss <= loss - 1e-4 * t * slope {
                w = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent along the Newton direction; the iterate is as good as it gets
            converged = grad.norm() <= LOGREG_GRAD_TOL * 1e3;
            break;
        }
    }
    if !converged {
        warn!("poly_logreg degree {degree}: stopped before gradient tolerance");
    }
    Ok(BasePredictor {
        name,
        columns,
        model: Model::PolyLogreg {
            degree,
            weights: w.iter().copied().collect(),
            converged,
        },
    })
}

fn project_rows(data: &Dataset, columns: Option<&[usize]>) -> Vec<Vec<f64>> {
    let all = rows(data.features());
    match columns {
        None => all,
        Some(cols) => all
            .into_iter()
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect(),
    }
}

/// Binary LDA: Gaussian classes with a shared covariance, empirical priors.
pub fn fit_lda(data: &Dataset) -> Result<BasePredictor> {
    fit_lda_on(data, None, "lda".into())
}

fn fit_lda_on(data: &Dataset, columns: Option<Vec<usize>>, name: String) -> Result<BasePredictor> {
    check_features(data)?;
    let y = binary_labels(data)?;
    let x = project_rows(data, columns.as_deref());
    let d = x[0].len();
    let mut counts = [0usize; 2];
    let mut means = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
    for (xi, yi) in x.iter().zip(&y) {
        let c = *yi as usize;
        counts[c] += 1;
        means[c] += DVector::from_column_slice(xi);
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::Fit(format!(
            "LDA needs at least 2 samples per class, got {counts:?}"
        )));
    }
    for c in 0..2 {
        means[c] /= counts[c] as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (xi, yi) in x.iter().zip(&y) {
        let diff = DVector::from_column_slice(xi) - &means[*yi as usize];
        cov.ger(1.0, &diff, &diff, 1.0);
    }
    cov /= (x.len() - 2) as f64;
    let diff = &means[1] - &means[0];
    let coef = match cov.clone().cholesky() {
        Some(ch) => ch.solve(&diff),
        None => {
            let mut jittered = cov;
            for i in 0..d {
                jittered[(i, i)] += LDA_JITTER;
            }
            jittered
                .cholesky()
                .ok_or_else(|| Error::Fit("pooled covariance is singular".into()))?
                .solve(&diff)
        }
    };
    let n = x.len() as f64;
    let priors = [counts[0] as f64 / n, counts[1] as f64 / n];
    let mid = (&means[0] + &means[1]) * 0.5;
    let intercept = -coef.dot(&mid) + (priors[1] / priors[0]).ln();
    Ok(BasePredictor {
        name,
        columns,
        model: Model::Lda {
            coef: coef.iter().copied().collect(),
            intercept,
            class_priors: priors,
        },
    })
}

/// Soft-circle classifier with fixed parameters.
pub fn soft_circle(center: [f64; 2], radius: f64, gamma: f64) -> Result<BasePredictor> {
    if gamma.is_nan() || gamma <= 0.0 {
        return arg_err("soft circle gamma must be positive");
    }
    Ok(BasePredictor {
        name: format!("soft_circle_g{gamma}"),
        columns: None,
        model: Model::SoftCircle {
            center,
            radius,
            gamma,
        },
    })
}

/// Penalized least squares with an unpenalized intercept; σ is the training
/// RMSE floored at `1e-3`.
pub fn fit_ridge(data: &Dataset, alpha: f64) -> Result<BasePredictor> {
    fit_ridge_on(data, alpha, None, format!("ridge_a{alpha}"))
}

fn fit_ridge_on(
    data: &Dataset,
    alpha: f64,
    columns: Option<Vec<usize>>,
    name: String,
) -> Result<BasePredictor> {
    check_features(data)?;
    if alpha.is_nan() || alpha < 0.0 {
        return arg_err("ridge alpha must be >= 0");
    }
    let y = data.real_labels()?;
    let x = project_rows(data, columns.as_deref());
    let (n, d) = (x.len(), x[0].len());
    let x_mean: Vec<f64> = (0..d)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..d {
        gram[(j, j)] += alpha;
    }
    let rhs = xc.transpose() * yc;
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Fit(format!("ridge solve failed: {e}")))?,
    };
    let coef: Vec<f64> = coef.iter().copied().collect();
    let intercept = y_mean - dot(&coef, &x_mean);
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - dot(&coef, xi)).powi(2))
        .sum();
    let sigma = (sse / n as f64).sqrt().max(SIGMA_FLOOR);
    Ok(BasePredictor {
        name,
        columns,
        model: Model::Ridge {
            intercept,
            coef,
            sigma,
        },
    })
}

/// Inverse-distance-weighted mean of the `k` nearest labels. `exclude`
/// removes one training row (used for leave-one-out residuals).
fn knn_predict(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    x: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<f64> {
    if train_x.first().map(Vec::len) != Some(x.len()) {
        return arg_err("knn query dimension mismatch");
    }
    let mut dists: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, t)| {
            let d2: f64 = t.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    let k = k.min(dists.len());
    if k == 0 {
        return arg_err("knn has no neighbours to average");
    }
    dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (num, den) = dists[..k].iter().fold((0.0, 0.0), |(num, den), (d, i)| {
        let w = 1.0 / (d + KNN_EPS);
        (num + w * train_y[*i], den + w)
    });
    Ok(num / den)
}

/// Distance-weighted k-NN regression. σ comes from leave-one-out residuals,
/// since in-sample residuals of an interpolating k-NN are zero.
pub fn fit_knn_reg(data: &Dataset, k: usize) -> Result<BasePredictor> {
    fit_knn_on(data, k, None, format!("knn_k{k}"))
}

fn fit_knn_on(
    data: &Dataset,
    k: usize,
    columns: Option<Vec<usize>>,
    name: String,
) -> Result<BasePredictor> {
    check_features(data)?;
    let y = data.real_labels()?.to_vec();
    if k == 0 || k > data.n() {
        return arg_err(format!("knn needs 1 <= k <= n, got k={k}, n={}", data.n()));
    }
    let x = project_rows(data, columns.as_deref());
    let sigma = if x.len() < 2 {
        SIGMA_FLOOR
    } else {
        let sse: f64 = (0..x.len())
            .map(|i| {
                let pred = knn_predict(&x, &y, &x[i], k, Some(i))?;
                Ok((y[i] - pred).powi(2))
            })
            .sum::<Result<f64>>()?;
        (sse / x.len() as f64).sqrt().max(SIGMA_FLOOR)
    };
    Ok(BasePredictor {
        name,
        columns,
        model: Model::KnnReg {
            k,
            train_x: x,
            train_y: y,
            sigma,
        },
    })
}

fn resolve_columns(spec: &PredictorSpec, data: &Dataset) -> Result<Option<Vec<usize>>> {
    let Some(cols) = &spec.columns else {
        return Ok(None);
    };
    cols.iter()
        .map(|c| {
            data.feature_names()
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| Error::Schema(format!("predictor column '{c}' not in dataset")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Fits one roster entry on `data`.
pub fn fit_predictor(spec: &PredictorSpec, data: &Dataset) -> Result<BasePredictor> {
    if spec.model.task() != data.task() {
        return Err(Error::Task(format!(
            "{} is a {} model but the data is {}",
            spec.display_name(),
            spec.model.task(),
            data.task()
        )));
    }
    let columns = resolve_columns(spec, data)?;
    let name = spec.display_name();
    match &spec.model {
        ModelSpec::PolyLogreg { degree } => fit_poly_logreg_on(data, *degree, columns, name),
        ModelSpec::Lda => fit_lda_on(data, columns, name),
        ModelSpec::SoftCircle {
            center,
            radius,
            gamma,
        } => {
            let mut p = soft_circle(*center, *radius, *gamma)?;
            p.name = name;
            p.columns = columns;
            Ok(p)
        }
        ModelSpec::Ridge { alpha } => fit_ridge_on(data, *alpha, columns, name),
        ModelSpec::KnnReg { k } => fit_knn_on(data, *k, columns, name),
    }
}

pub fn fit_roster(specs: &[PredictorSpec], data: &Dataset) -> Result<Vec<BasePredictor>> {
    if specs.is_empty() {
        return Err(Error::Validation("predictor roster is empty".into()));
    }
    let fitted = specs
        .iter()
        .map(|s| fit_predictor(s, data))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = fitted.iter().map(|p| p.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation("predictor names must be unique".into()));
    }
    Ok(fitted)
}

/// `log f_j(y_i | x_i)` for every row and predictor.
pub fn loglik_table(predictors: &[BasePredictor], data: &Dataset) -> Result<LikelihoodTable> {
    if predictors.is_empty() {
        return arg_err("no predictors");
    }
    if let Some(p) = predictors.iter().find(|p| p.task() != data.task()) {
        return arg_err(format!(
            "{} is a {} model but the data is {}",
            p.name,
            p.task(),
            data.task()
        ));
    }
    let mut table = Array2::<f64>::zeros((data.n(), predictors.len()));
    for i in 0..data.n() {
        let x = data.row(i).to_vec();
        let y = data.labels().value(i);
        for (j, p) in predictors.iter().enumerate() {
            table[[i, j]] = p.log_likelihood(&x, y)?;
        }
    }
    LikelihoodTable::new(table, predictors.iter().map(|p| p.name.clone()).collect())
}

/// Serialized form of a fitted roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSet {
    pub version: u32,
    pub task: Task,
    pub predictors: Vec<BasePredictor>,
}

impl PredictorSet {
    pub fn new(task: Task, predictors: Vec<BasePredictor>) -> Self {
        Self {
            version: PREDICTORS_FORMAT_VERSION,
            task,
            predictors,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(s)?;
        if set.version != PREDICTORS_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported predictor document version {}",
                set.version
            )));
        }
        if let Some(p) = set.predictors.iter().find(|p| p.task() != set.task) {
            return Err(Error::Format(format!("{} does not match task {}", p.name, set.task)));
        }
        Ok(set)
    }
}
