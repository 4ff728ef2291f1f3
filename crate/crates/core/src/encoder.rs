//! Convolutional encoder with average pooling over time.
//!
//! A window of `window` consecutive input vectors (each of `input_dim`) is
//! concatenated, multiplied by a `(window * input_dim) x output_dim` filter,
//! shifted by the bias and squashed. The encoding is the mean of the window
//! outputs. With `window = 1` the encoder is a set function.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// Linear probe used to check the windowing and pooling skeleton.
    #[doc(hidden)]
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, p: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - p * p,
            Activation::Identity => 1.0,
        }
    }
}

/// Which windows enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    AllWindows,
    /// Literal `1 < i <= l` range; falls back to all windows when `l = 1`.
    SkipFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub window: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub pooling: Pooling,
    /// Row-major `(window * input_dim) x output_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(window: usize, input_dim: usize, output_dim: usize) -> Self {
        ConvParams {
            window,
            input_dim,
            output_dim,
            activation: Activation::Tanh,
            pooling: Pooling::AllWindows,
            weights: vec![0.0; window * input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    /// Weights uniform in `±sqrt(6 / (window * input_dim + output_dim))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(window: usize, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(window, input_dim, output_dim);
        let limit = util::glorot_limit(window * input_dim, output_dim);
        p.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..=limit));
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 || self.input_dim < 1 || self.output_dim < 1 {
            return Err(Error::Shape("convolution window and dimensions must be positive".into()));
        }
        if self.weights.len() != self.window * self.input_dim * self.output_dim || self.bias.len() != self.output_dim {
            return Err(Error::Shape(format!(
                "filter holds {} weights and {} biases, expected {}x{} and {}",
                self.weights.len(),
                self.bias.len(),
                self.window * self.input_dim,
                self.output_dim,
                self.output_dim
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite convolution parameter".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &[&[f64]]) -> Result<()> {
        if let Some(row) = x.iter().find(|r| r.len() != self.input_dim) {
            return Err(Error::Shape(format!(
                "input vector of length {} for a filter over {}x{} rows",
                row.len(),
                self.window,
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Number of windows after right-padding to at least `window` vectors.
    pub fn window_count(&self, len: usize) -> usize {
        len.max(self.window) - self.window + 1
    }

    fn pooled_range(&self, windows: usize) -> std::ops::Range<usize> {
        match self.pooling {
            Pooling::SkipFirst if windows > 1 => 1..windows,
            _ => 0..windows,
        }
    }
}

/// The pooled `output_dim` representation of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVec {
    pub c: Vec<f64>,
}

/// Window outputs of the pooled windows, kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct ConvCache {
    outputs: Vec<f64>,
}

fn window_outputs(x: &[&[f64]], p: &ConvParams, range: std::ops::Range<usize>) -> Vec<f64> {
    let m = p.output_dim;
    let k = p.input_dim;
    let mut out = Vec::with_capacity(range.len() * m);
    for i in range {
        let start = out.len();
        out.extend_from_slice(&p.bias);
        let z = &mut out[start..];
        for j in 0..p.window {
            let Some(row) = x.get(i + j) else { break };
            for (a, &xa) in row.iter().enumerate() {
                if xa == 0.0 {
                    continue;
                }
                let w = &p.weights[(j * k + a) * m..(j * k + a + 1) * m];
                for (zo, &wo) in z.iter_mut().zip(w) {
                    *zo += xa * wo;
                }
            }
        }
        z.iter_mut().for_each(|v| *v = p.activation.apply(*v));
    }
    out
}

pub(crate) fn encode_cached(x: &[&[f64]], p: &ConvParams) -> Result<(EncodedVec, ConvCache)> {
    p.check_input(x)?;
    let m = p.output_dim;
    let range = p.pooled_range(p.window_count(x.len()));
    let count = range.len() as f64;
    let outputs = window_outputs(x, p, range);
    // Summing sorted values makes the pooled result independent of window order.
    let mut column = Vec::with_capacity(outputs.len() / m);
    let c = (0..m)
        .map(|o| {
            column.clear();
            column.extend(outputs.iter().skip(o).step_by(m).copied());
            column.sort_unstable_by(f64::total_cmp);
            column.iter().sum::<f64>() / count
        })
        .collect();
    Ok((EncodedVec { c }, ConvCache { outputs }))
}

/// Encodes a sequence of `input_dim` vectors. Sequences shorter than the
/// window are right-padded with zero vectors.
pub fn encode(x: &[&[f64]], p: &ConvParams) -> Result<EncodedVec> {
    encode_cached(x, p).map(|(c, _)| c)
}

/// Filter and bias gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvGrads {
    pub fn zeros_like(p: &ConvParams) -> Self {
        ConvGrads {
            weights: vec![0.0; p.weights.len()],
            bias: vec![0.0; p.bias.len()],
        }
    }
}

pub(crate) fn accumulate_backward(x: &[&[f64]], p: &ConvParams, cache: &ConvCache, upstream: &[f64], grads: &mut ConvGrads) {
    let m = p.output_dim;
    let k = p.input_dim;
    let range = p.pooled_range(p.window_count(x.len()));
    let count = range.len() as f64;
    let mut delta = vec![0.0; m];
    for (slot, i) in range.enumerate() {
        let out = &cache.outputs[slot * m..(slot + 1) * m];
        for ((d, &g), &po) in delta.iter_mut().zip(upstream).zip(out) {
            *d = g * p.activation.derivative_from_output(po) / count;
        }
        for (gb, d) in grads.bias.iter_mut().zip(&delta) {
            *gb += d;
        }
        for j in 0..p.window {
            let Some(row) = x.get(i + j) else { break };
            for (a, &xa) in row.iter().enumerate() {
                if xa == 0.0 {
                    continue;
                }
                let gw = &mut grads.weights[(j * k + a) * m..(j * k + a + 1) * m];
                for (g, d) in gw.iter_mut().zip(&delta) {
                    *g += xa * d;
                }
            }
        }
    }
}

/// Gradients of `upstream · encode(x, p)` with respect to the filter and
/// bias. Inputs are fixed embeddings and receive no gradient.
pub fn encode_backward(x: &[&[f64]], p: &ConvParams, upstream: &[f64]) -> Result<ConvGrads> {
    if upstream.len() != p.output_dim {
        return Err(Error::Shape(format!(
            "upstream gradient of length {} for {} outputs",
            upstream.len(),
            p.output_dim
        )));
    }
    let (_, cache) = encode_cached(x, p)?;
    let mut grads = ConvGrads::zeros_like(p);
    accumulate_backward(x, p, &cache, upstream, &mut grads);
    Ok(grads)
}
