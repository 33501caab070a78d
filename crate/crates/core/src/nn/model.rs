//! A small fully connected network with hand-written backpropagation.
//!
//! Weights are `out x in`, inputs are `batch x features`, so a layer
//! computes `Z = X̃·Wᵀ + 1·bᵀ` with `X̃` the (optionally normalized) input.

use alloc::vec::Vec;

use super::norm::{self, NormCache, PreLayerNorm};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::random::{standard_normal, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub weight: Matrix,
    /// `out x 1`.
    pub bias: Matrix,
    pub activation: Activation,
    pub pre_layer_norm: PreLayerNorm,
}

/// Dense layers followed by a softmax cross-entropy head (mean over the
/// batch).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub loss: f64,
    pub grads: Vec<LayerGrads>,
    /// Input of every layer after its normalization.
    pub layer_inputs: Vec<Matrix>,
}

fn non_finite(layer: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { .. } => Error::NonFiniteForward { layer },
        other => other,
    }
}

impl MlpModel {
    /// He-initialized network with ReLU hidden layers and a linear output,
    /// e.g. `dims = [16, 32, 32, 3]`. Biases start at zero.
    pub fn new(rng: &mut Rng, dims: &[usize], pre_layer_norm: PreLayerNorm) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "model needs at least two positive layer widths",
            ));
        }
        let depth = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = libm::sqrt(2.0 / fan_in as f64);
                let data = (0..fan_in * fan_out)
                    .map(|_| std * standard_normal(rng))
                    .collect();
                Ok(Layer {
                    weight: Matrix::new(fan_out, fan_in, data)?,
                    bias: Matrix::zeros(fan_out, 1),
                    activation: if l + 1 == depth {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                    pre_layer_norm,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.rows())
            .sum()
    }

    /// Labelled parameter shapes in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn parameter_shapes(&self) -> Vec<(alloc::string::String, (usize, usize))> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((alloc::format!("w{l}"), layer.weight.shape()));
            out.push((alloc::format!("b{l}"), layer.bias.shape()));
        }
        out
    }

    /// `sqrt(Σ‖W_l‖²)` over weight matrices only.
    pub fn weight_norm(&self) -> f64 {
        libm::sqrt(self.layers.iter().map(|l| sq(&l.weight)).sum())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(x.mismatch("MlpModel input", &self.layers[0].weight));
        }
        Ok(())
    }

    /// Logits for a batch.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let (xt, _) = norm::apply(layer.pre_layer_norm, &h).map_err(non_finite(l))?;
            h = affine(layer, &xt).map_err(non_finite(l))?;
            if layer.activation == Activation::Relu {
                h = h.map(relu).map_err(non_finite(l))?;
            }
        }
        Ok(h)
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(x)?;
        Ok(softmax_cross_entropy(&logits, labels, self.layers.len() - 1)?.0)
    }

    /// Fraction of rows whose arg-max logit equals the label.
    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(x)?;
        check_labels(&logits, labels)?;
        let hits = labels
            .iter()
            .enumerate()
            .filter(|&(i, &y)| argmax(logits.row(i)) == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Loss, parameter gradients and normalized layer inputs for a batch.
    pub fn forward_backward(&self, x: &Matrix, labels: &[usize]) -> Result<ForwardBackward> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut inputs: Vec<Matrix> = Vec::with_capacity(n);
        let mut caches: Vec<NormCache> = Vec::with_capacity(n);
        let mut pre_acts: Vec<Matrix> = Vec::with_capacity(n);
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let (xt, cache) = norm::apply(layer.pre_layer_norm, &h).map_err(non_finite(l))?;
            let z = affine(layer, &xt).map_err(non_finite(l))?;
            h = match layer.activation {
                Activation::Relu => z.map(relu).map_err(non_finite(l))?,
                Activation::Identity => z.clone(),
            };
            inputs.push(xt);
            caches.push(cache);
            pre_acts.push(z);
        }
        let (loss, mut dz) = softmax_cross_entropy(&h, labels, n - 1)?;

        let mut grads: Vec<LayerGrads> = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if layer.activation == Activation::Relu {
                let z = &pre_acts[l];
                dz = Matrix::from_fn(dz.rows(), dz.cols(), |i, j| {
                    if z.get(i, j) > 0.0 {
                        dz.get(i, j)
                    } else {
                        0.0
                    }
                })?;
            }
            let weight = dz.t_matmul(&inputs[l])?;
            let bias = Matrix::from_fn(dz.cols(), 1, |j, _| {
                (0..dz.rows()).map(|i| dz.get(i, j)).sum()
            })?;
            grads.push(LayerGrads { weight, bias });
            if l > 0 {
                let dxt = dz.matmul(&layer.weight)?;
                dz = norm::backward(&caches[l], &inputs[l], &dxt)?;
            }
        }
        grads.reverse();
        Ok(ForwardBackward {
            loss,
            grads,
            layer_inputs: inputs,
        })
    }
}

pub(crate) fn sq(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn affine(layer: &Layer, xt: &Matrix) -> Result<Matrix> {
    let z = xt.matmul_t(&layer.weight)?;
    let b = layer.bias.as_slice();
    Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j) + b[j])
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(Error::InvalidArgument(
            "one label per input row is required",
        ));
    }
    if labels.iter().any(|&y| y >= logits.cols()) {
        return Err(Error::InvalidArgument("label out of range"));
    }
    Ok(())
}

/// Mean cross-entropy and its gradient with respect to the logits.
fn softmax_cross_entropy(logits: &Matrix, labels: &[usize], layer: usize) -> Result<(f64, Matrix)> {
    check_labels(logits, labels)?;
    let (b, k) = logits.shape();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(b * k);
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| libm::exp(v - max)).sum();
        let log_z = max + libm::log(sum);
        loss += log_z - row[y];
        for (j, v) in row.iter().enumerate() {
            let p = libm::exp(v - log_z);
            grad.push((p - if j == y { 1.0 } else { 0.0 }) / b as f64);
        }
    }
    loss /= b as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteForward { layer });
    }
    let grad = Matrix::new(b, k, grad).map_err(non_finite(layer))?;
    Ok((loss, grad))
}
