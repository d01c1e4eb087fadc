//! Fully connected ReLU network with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteError};
use crate::scalar::{uniform_in, Scalar};

/// Affine layer; `weights` is `outputs × inputs`, row-major (one row per
/// output unit).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    inputs: usize,
    outputs: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) biases: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            biases: vec![T::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    #[inline]
    fn row(&self, o: usize) -> &[T] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    fn forward_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend((0..self.outputs).map(|o| dot(self.row(o), x) + self.biases[o]));
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (ra, rb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] = acc[k] + ra[k] * rb[k];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail = tail + a[i] * b[i];
    }
    acc.iter().copied().fold(tail, |s, v| s + v)
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Q-function approximator: ReLU hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork<T> {
    layers: Vec<Dense<T>>,
}

/// Parameter-shaped buffer holding dL/dθ.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub(crate) layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradient<T> {
    pub fn flatten(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers<T: Scalar>(layers: &[Dense<T>]) -> Vec<T> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
        .collect()
}

/// Per-sample activations kept for the backward pass.
struct Trace<T> {
    /// Input to each layer (index 0 is the network input).
    inputs: Vec<Vec<T>>,
    output: Vec<T>,
}

impl<T: Scalar> QNetwork<T> {
    /// All weights and biases zero.
    pub fn zeros(architecture: &[usize]) -> Result<Self> {
        check_architecture(architecture)?;
        Ok(Self {
            layers: architecture.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn new<R: Rng + ?Sized>(architecture: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(architecture)?;
        for layer in &mut net.layers {
            let limit = T::lit(6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = uniform_in(rng, -limit, limit);
            }
        }
        Ok(net)
    }

    pub fn architecture(&self) -> Vec<usize> {
        let mut arch = vec![self.layers[0].inputs];
        arch.extend(self.layers.iter().map(|l| l.outputs));
        arch
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn action_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(SteError::Config(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn forward_trace(&self, input: &[T]) -> Trace<T> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&x, &mut out);
            if i != last {
                for v in &mut out {
                    *v = v.max(T::zero());
                }
            }
            inputs.push(std::mem::replace(&mut x, std::mem::take(&mut out)));
        }
        Trace { inputs, output: x }
    }

    /// Action values for one feature vector.
    pub fn q_values(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.input_len());
        let mut x = input.to_vec();
        let mut out = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&x, &mut out);
            if i != last {
                for v in &mut out {
                    *v = v.max(T::zero());
                }
            }
            std::mem::swap(&mut x, &mut out);
        }
        x
    }

    /// Accumulates `∂(upstream · Q(input)[action]) / ∂θ` into `grad`, where
    /// `trace` is the forward pass for `input`.
    fn backward(&self, trace: &Trace<T>, action: usize, upstream: T, grad: &mut Gradient<T>) {
        let mut delta = vec![T::zero(); self.action_count()];
        delta[action] = upstream;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            let x = &trace.inputs[l];
            for (o, &d) in delta.iter().enumerate() {
                if d != T::zero() {
                    axpy(d, x, &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs]);
                    g.biases[o] = g.biases[o] + d;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![T::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d != T::zero() {
                    axpy(d, layer.row(o), &mut prev);
                }
            }
            // x is the ReLU output of the previous layer: zero exactly where
            // the pre-activation was non-positive.
            for (p, &xi) in prev.iter_mut().zip(x) {
                if xi <= T::zero() {
                    *p = T::zero();
                }
            }
            delta = prev;
        }
    }

    pub fn zero_gradient(&self) -> Gradient<T> {
        Gradient {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    /// `θ ← θ - lr · g`.
    pub fn apply_gradient(&mut self, grad: &Gradient<T>, lr: T) {
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            axpy(-lr, &g.weights, &mut layer.weights);
            axpy(-lr, &g.biases, &mut layer.biases);
        }
    }

    /// Copies every parameter of `source` bit for bit.
    pub fn copy_from(&mut self, source: &QNetwork<T>) -> Result<()> {
        if self.architecture() != source.architecture() {
            return Err(SteError::ArchitectureMismatch {
                left: self.architecture(),
                right: source.architecture(),
            });
        }
        self.layers.clone_from(&source.layers);
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: Checkpoint::VERSION,
            architecture: self.architecture(),
            activation: "relu".to_string(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: l.weights.iter().map(|v| v.to_f64_lossy()).collect(),
                    biases: l.biases.iter().map(|v| v.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.version != Checkpoint::VERSION {
            return Err(SteError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        if ck.activation != "relu" {
            return Err(SteError::Checkpoint(format!("unsupported activation {:?}", ck.activation)));
        }
        let mut net = Self::zeros(&ck.architecture).map_err(|e| SteError::Checkpoint(e.to_string()))?;
        if ck.layers.len() != net.layers.len() {
            return Err(SteError::Checkpoint(format!(
                "architecture has {} layers but {} were stored",
                net.layers.len(),
                ck.layers.len()
            )));
        }
        for (i, (layer, stored)) in net.layers.iter_mut().zip(&ck.layers).enumerate() {
            if stored.weights.len() != layer.weights.len() || stored.biases.len() != layer.biases.len() {
                return Err(SteError::Checkpoint(format!("layer {i} has the wrong shape")));
            }
            for (d, s) in layer.weights.iter_mut().zip(&stored.weights) {
                *d = T::lit(*s);
            }
            for (d, s) in layer.biases.iter_mut().zip(&stored.biases) {
                *d = T::lit(*s);
            }
        }
        if !net.is_finite() {
            return Err(SteError::Checkpoint("non-finite parameters".into()));
        }
        Ok(net)
    }
}

fn check_architecture(architecture: &[usize]) -> Result<()> {
    if architecture.len() < 2 || architecture.contains(&0) {
        return Err(SteError::Config(format!("invalid architecture {architecture:?}")));
    }
    Ok(())
}

/// One stored transition. `action` indexes the environment's action set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub features: Vec<T>,
    pub action: usize,
    pub reward: T,
    pub next_features: Vec<T>,
    pub done: bool,
}

/// Mean squared Bellman error over `batch` and its gradient with respect to
/// `net`. Targets come from `target` and are treated as constants.
pub fn bellman_loss_and_gradient<T: Scalar>(
    net: &QNetwork<T>,
    target: &QNetwork<T>,
    batch: &[&Transition<T>],
    gamma: T,
) -> (T, Gradient<T>) {
    let mut grad = net.zero_gradient();
    let n = T::from_usize_lossy(batch.len());
    let mut loss = T::zero();
    for t in batch {
        let y = if t.done {
            t.reward
        } else {
            let next = target.q_values(&t.next_features);
            t.reward + gamma * next.into_iter().fold(T::neg_infinity(), T::max)
        };
        let trace = net.forward_trace(&t.features);
        let err = trace.output[t.action] - y;
        loss = loss + err * err;
        net.backward(&trace, t.action, T::lit(2.0) * err / n, &mut grad);
    }
    (loss / n, grad)
}

/// Serialized network: `{version, architecture, activation, layers}` with
/// each layer's weights flattened row-major as `outputs × inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub architecture: Vec<usize>,
    pub activation: String,
    pub layers: Vec<LayerParams>,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}
