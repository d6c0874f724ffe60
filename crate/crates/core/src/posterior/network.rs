//! Small fully connected softmax network with hand-written backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::math::softmax_into;
use crate::types::SimplexWeights;

/// Hidden layer widths used for both the posterior and the MoE gate.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 32, 16];

/// Version tag of the serialized network document.
pub const NET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputInit {
    /// Zero output layer: the untrained net returns uniform weights.
    Zero,
    /// Output layer drawn like the hidden layers.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Offset of the row-major `outputs × inputs` weight block.
    w: usize,
    /// Offset of the bias vector.
    b: usize,
}

/// Feed-forward net `d → hidden… → m` with ReLU hidden units and a softmax output.
///
/// Parameters live in one flat vector, layer by layer, weights (row-major)
/// before biases.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorNet {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    params: Vec<f64>,
    seed: u64,
}

/// Per-row activations kept for the backward pass.
#[derive(Debug, Default, Clone)]
pub(crate) struct Activations {
    /// `acts[0]` is the input, `acts[l]` the post-ReLU output of layer `l`,
    /// and the last entry holds the logits.
    acts: Vec<Vec<f64>>,
}

impl Activations {
    pub(crate) fn logits(&self) -> &[f64] {
        self.acts.last().expect("forward pass ran")
    }
}

impl PosteriorNet {
    /// Default architecture `d → 64 → 32 → 16 → m` with a zero output layer.
    pub fn new(inputs: usize, models: usize, seed: u64) -> Result<Self> {
        Self::with_hidden(inputs, &DEFAULT_HIDDEN, models, seed, OutputInit::Zero)
    }

    /// Hidden layers use He-uniform initialization `U(±sqrt(6 / fan_in))`
    /// with zero biases.
    pub fn with_hidden(
        inputs: usize,
        hidden: &[usize],
        models: usize,
        seed: u64,
        output_init: OutputInit,
    ) -> Result<Self> {
        if inputs == 0 || models == 0 || hidden.contains(&0) {
            return arg_err("network layer sizes must be positive");
        }
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(models);
        let mut net = Self::zeroed(sizes, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.clone().into_iter().enumerate() {
            if l == last && output_init == OutputInit::Zero {
                continue;
            }
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for p in &mut net.params[layer.w..layer.w + layer.inputs * layer.outputs] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    fn zeroed(sizes: Vec<usize>, seed: u64) -> Self {
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for pair in sizes.windows(2) {
            let (inputs, outputs) = (pair[0], pair[1]);
            let w = offset;
            let b = w + inputs * outputs;
            offset = b + outputs;
            layers.push(Layer {
                inputs,
                outputs,
                w,
                b,
            });
        }
        Self {
            sizes,
            layers,
            params: vec![0.0; offset],
            seed,
        }
    }

    /// Adds `U(−scale, scale)` noise to every parameter, biases included.
    /// Nonzero biases keep finite-difference probes away from ReLU kinks.
    pub fn jitter(&mut self, scale: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            *p += rng.random_range(-scale..=scale);
        }
    }

    /// `Σ_l (in_l · out_l + out_l)` over consecutive layer sizes.
    pub fn expected_param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Reorders the output units so that new unit `j` is old unit `perm[j]`.
    pub fn permute_outputs(&mut self, perm: &[usize]) -> Result<()> {
        let m = self.outputs();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return arg_err("not a permutation of the output units");
        }
        let layer = *self.layers.last().unwrap();
        let old = self.params.clone();
        for (j, &src) in perm.iter().enumerate() {
            for c in 0..layer.inputs {
                self.params[layer.w + j * layer.inputs + c] = old[layer.w + src * layer.inputs + c];
            }
            self.params[layer.b + j] = old[layer.b + src];
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs() {
            return arg_err(format!(
                "network expects {} inputs, got {}",
                self.inputs(),
                x.len()
            ));
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, x: &[f64], cache: &mut Activations) {
        cache.acts.resize(self.sizes.len(), Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.clear();
            out.resize(layer.outputs, 0.0);
            let w = &self.params[layer.w..layer.b];
            let b = &self.params[layer.b..layer.b + layer.outputs];
            for (o, row) in w.chunks_exact(layer.inputs).enumerate() {
                let z = b[o] + row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>();
                out[o] = if l < last { z.max(0.0) } else { z };
            }
        }
    }

    /// Accumulates `∂objective/∂θ` into `grad` given `∂objective/∂logits`.
    pub(crate) fn backward_into(&self, cache: &Activations, dlogits: &[f64], grad: &mut [f64]) {
        let mut delta = dlogits.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.acts[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grad[layer.b + o] += d;
                let g = &mut grad[layer.w + o * layer.inputs..layer.w + (o + 1) * layer.inputs];
                for (gi, v) in g.iter_mut().zip(input) {
                    *gi += d * v;
                }
            }
            if l == 0 {
                break;
            }
            next.clear();
            next.resize(layer.inputs, 0.0);
            let w = &self.params[layer.w..layer.b];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (n, a) in next.iter_mut().zip(&w[o * layer.inputs..(o + 1) * layer.inputs]) {
                    *n += d * a;
                }
            }
            // ReLU mask from the post-activation of the previous layer
            for (n, a) in next.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            std::mem::swap(&mut delta, &mut next);
        }
    }

    /// Output logits before the softmax.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cache = Activations::default();
        self.forward_into(x, &mut cache);
        Ok(cache.logits().to_vec())
    }

    /// `h_θ(x)`: softmax of the final affine layer.
    pub fn forward(&self, x: &[f64]) -> Result<SimplexWeights> {
        let z = self.logits(x)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite network output".into()));
        }
        let mut out = vec![0.0; z.len()];
        softmax_into(&z, &mut out);
        Ok(SimplexWeights::from_softmax(out))
    }

    pub fn to_document<C: Serialize>(&self, config: &C) -> Result<NetDocument> {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerDoc {
                weights: self.params[l.w..l.b]
                    .chunks_exact(l.inputs)
                    .map(<[f64]>::to_vec)
                    .collect(),
                bias: self.params[l.b..l.b + l.outputs].to_vec(),
            })
            .collect();
        Ok(NetDocument {
            version: NET_FORMAT_VERSION,
            architecture: self.sizes.clone(),
            activation: "relu".into(),
            output: "softmax".into(),
            seed: self.seed,
            config: serde_json::to_value(config)?,
            layers,
        })
    }

    pub fn from_document(doc: &NetDocument) -> Result<Self> {
        if doc.version != NET_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported network document version {}",
                doc.version
            )));
        }
        if doc.architecture.len() < 2 || doc.architecture.contains(&0) {
            return Err(Error::Format("invalid architecture".into()));
        }
        let mut net = Self::zeroed(doc.architecture.clone(), doc.seed);
        if doc.layers.len() != net.layers.len() {
            return Err(Error::Format("layer count does not match architecture".into()));
        }
        for (layer, ld) in net.layers.clone().iter().zip(&doc.layers) {
            if ld.weights.len() != layer.outputs
                || ld.weights.iter().any(|r| r.len() != layer.inputs)
                || ld.bias.len() != layer.outputs
            {
                return Err(Error::Format("layer shape does not match architecture".into()));
            }
            for (o, row) in ld.weights.iter().enumerate() {
                net.params[layer.w + o * layer.inputs..layer.w + (o + 1) * layer.inputs]
                    .copy_from_slice(row);
            }
            net.params[layer.b..layer.b + layer.outputs].copy_from_slice(&ld.bias);
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite network parameter".into()));
        }
        Ok(net)
    }
}

/// JSON form of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDocument {
    pub version: u32,
    pub architecture: Vec<usize>,
    pub activation: String,
    pub output: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub layers: Vec<LayerDoc>,
}

/// Weights are `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Adam state over a flat parameter vector (minimization form).
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub(crate) fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One descent step along `grad` of the loss.
    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
