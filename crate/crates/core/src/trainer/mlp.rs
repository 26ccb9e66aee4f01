//! Fully-connected networks over a flat parameter vector.
//!
//! Parameters are laid out layer by layer; each layer stores its weight
//! matrix row-major (`out x in`) followed by its bias vector. The last layer
//! is the output layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `[inputs, hidden..., classes]`
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, init_seed: u64) -> Result<Self> {
        let spec = ModelSpec {
            layer_sizes,
            activation,
            init_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::param("a model needs at least one hidden layer"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::param("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offset of layer `l`'s weights in the flat vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| (self.layer_sizes[k] + 1) * self.layer_sizes[k + 1])
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.layer_offset(self.n_layers())
    }

    /// Range of the output layer's weights and biases.
    pub fn output_layer_range(&self) -> std::ops::Range<usize> {
        self.layer_offset(self.n_layers() - 1)..self.param_count()
    }

    /// Same architecture, ignoring the init seed.
    pub fn same_architecture(&self, other: &ModelSpec) -> bool {
        self.layer_sizes == other.layer_sizes && self.activation == other.activation
    }

    /// Compact id such as `mlp-2x32x32x2-relu`.
    pub fn id(&self) -> String {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        format!("mlp-{}-{:?}", sizes.join("x"), self.activation).to_lowercase()
    }

    /// He-uniform weights, zero biases.
    pub fn init_params(&self) -> Vec<f64> {
        let mut rng = stream_rng(self.init_seed, streams::INIT);
        let mut params = Vec::with_capacity(self.param_count());
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        params
    }
}

/// Scratch buffers for one forward/backward pass.
pub(crate) struct Workspace {
    /// Post-activation values per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    pub(crate) probs: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(spec: &ModelSpec) -> Self {
        Workspace {
            acts: spec.layer_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: spec.layer_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            probs: vec![0.0; spec.classes()],
        }
    }
}

/// Forward pass; leaves softmax probabilities in `ws.probs`.
pub(crate) fn forward(spec: &ModelSpec, params: &[f64], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let n_layers = spec.n_layers();
    let mut off = 0;
    for l in 0..n_layers {
        let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let (w, rest) = params[off..].split_at(n_in * n_out);
        let b = &rest[..n_out];
        let (prev, next) = ws.acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut next[0];
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            out[o] = if l + 1 == n_layers {
                z
            } else {
                match spec.activation {
                    Activation::ReLU => z.max(0.0),
                    Activation::Tanh => z.tanh(),
                }
            };
        }
        off += (n_in + 1) * n_out;
    }
    softmax(&ws.acts[n_layers], &mut ws.probs);
}

fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Cross-entropy against a label-smoothed one-hot target.
pub(crate) fn smoothed_loss(probs: &[f64], label: usize, smoothing: f64) -> f64 {
    let c = probs.len() as f64;
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let q = target(j, label, smoothing, c);
            if q == 0.0 {
                0.0
            } else {
                -q * p.ln()
            }
        })
        .sum()
}

#[inline]
fn target(j: usize, label: usize, smoothing: f64, c: f64) -> f64 {
    let base = smoothing / c;
    if j == label {
        1.0 - smoothing + base
    } else {
        base
    }
}

/// Forward and backward pass for one sample, adding the loss gradient into
/// `grad`. Returns the sample loss.
pub(crate) fn accumulate_gradient(
    spec: &ModelSpec,
    params: &[f64],
    x: &[f64],
    label: usize,
    smoothing: f64,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    forward(spec, params, x, ws);
    let loss = smoothed_loss(&ws.probs, label, smoothing);
    let n_layers = spec.n_layers();
    let c = spec.classes() as f64;
    for (j, d) in ws.deltas[n_layers].iter_mut().enumerate() {
        *d = ws.probs[j] - target(j, label, smoothing, c);
    }
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let off = spec.layer_offset(l);
        let w = &params[off..off + n_in * n_out];
        let (dprev, dnext) = ws.deltas.split_at_mut(l + 1);
        let delta = &dnext[0];
        let input = &ws.acts[l];
        {
            let (gw, gb) = grad[off..off + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *g += d * a;
                }
            }
        }
        if l == 0 {
            break;
        }
        let back = &mut dprev[l];
        back.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..n_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            for (b, wv) in back.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                *b += d * wv;
            }
        }
        for (b, &a) in back.iter_mut().zip(input) {
            *b *= match spec.activation {
                Activation::ReLU => {
                    if a > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Tanh => 1.0 - a * a,
            };
        }
    }
    loss
}
