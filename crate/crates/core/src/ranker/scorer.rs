use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Fully connected layer; `weights` is row-major `output_dim x input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Dense {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    /// `W[:, range] x` without the bias.
    fn partial(&self, x: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
        self.weights.chunks_exact(self.input_dim).map(|row| util::dot(&row[range.clone()], x)).collect()
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.input_dim)
                .zip(&self.bias)
                .map(|(row, b)| util::dot(row, x) + b),
        );
    }
}

/// The relevance MLP: relu hidden layers, one tanh output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Activations kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct ScorerCache {
    /// Input of every layer (post-dropout for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Relu outputs before dropout, one per hidden layer.
    relu: Vec<Vec<f64>>,
    /// Inverted-dropout scale per hidden unit (0 or 1/(1-rate)).
    masks: Vec<Option<Vec<f64>>>,
    output: f64,
}

impl ScorerParams {
    /// Layer sizes `input_dim -> hidden[0] -> ... -> 1`, all zero.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        ScorerParams {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut s = Self::zeros(input_dim, hidden);
        for l in &mut s.layers {
            let limit = util::glorot_limit(l.input_dim, l.output_dim);
            l.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..=limit));
        }
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.output_dim).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("scorer has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.input_dim * l.output_dim || l.bias.len() != l.output_dim || l.input_dim == 0 {
                return Err(Error::Shape(format!("scorer layer {i} has inconsistent shape")));
            }
            if i > 0 && self.layers[i - 1].output_dim != l.input_dim {
                return Err(Error::Shape(format!("scorer layer {i} does not chain with layer {}", i - 1)));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite parameter in scorer layer {i}")));
            }
        }
        if self.layers.last().unwrap().output_dim != 1 {
            return Err(Error::Shape("scorer output layer must have one unit".into()));
        }
        Ok(())
    }

    /// First-layer contribution of the query half of the input. The first
    /// layer always sums the query and document halves separately, so a
    /// query's half can be computed once and reused across documents.
    pub fn query_half(&self, xq: &[f64]) -> Vec<f64> {
        self.layers[0].partial(xq, 0..xq.len())
    }

    /// First-layer contribution of the document half of the input.
    pub fn doc_half(&self, xd: &[f64]) -> Vec<f64> {
        let l = &self.layers[0];
        l.partial(xd, l.input_dim - xd.len()..l.input_dim)
    }

    fn first_layer(&self, x: &[f64]) -> Vec<f64> {
        let h = x.len() / 2;
        self.combine(&self.query_half(&x[..h]), &self.doc_half(&x[h..]))
    }

    fn combine(&self, q: &[f64], d: &[f64]) -> Vec<f64> {
        q.iter().zip(d).zip(&self.layers[0].bias).map(|((a, b), c)| (a + b) + c).collect()
    }

    /// Inference-time score in (-1, 1); dropout is inactive.
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_from(self.first_layer(x))
    }

    /// Score from precomputed query and document halves; equal to
    /// `forward` on the concatenated input.
    pub fn forward_halves(&self, q: &[f64], d: &[f64]) -> f64 {
        self.forward_from(self.combine(q, d))
    }

    fn forward_from(&self, mut z: Vec<f64>) -> f64 {
        let mut a = Vec::new();
        for l in &self.layers[1..] {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            std::mem::swap(&mut a, &mut z);
            l.affine(&a, &mut z);
        }
        z[0].tanh()
    }

    /// Training forward pass with optional inverted dropout on hidden units.
    pub(crate) fn forward_train<R: Rng + ?Sized>(&self, x: &[f64], mut dropout: Option<(f64, &mut R)>) -> ScorerCache {
        let mut cache = ScorerCache::default();
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.output_dim);
            if i == 0 {
                z = self.first_layer(&a);
            } else {
                l.affine(&a, &mut z);
            }
            cache.inputs.push(a);
            if i == last {
                cache.output = z[0].tanh();
                break;
            }
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            let mut h = z.clone();
            let mask = match dropout.as_mut() {
                Some((rate, rng)) if *rate > 0.0 => {
                    let keep = 1.0 / (1.0 - *rate);
                    let m: Vec<f64> = (0..h.len()).map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep }).collect();
                    h.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                    Some(m)
                }
                _ => None,
            };
            cache.relu.push(z);
            cache.masks.push(mask);
            a = h;
        }
        cache
    }

    /// Accumulates parameter gradients of `upstream * score` into `grads` and
    /// returns the gradient with respect to the scorer input.
    pub(crate) fn backward(&self, cache: &ScorerCache, upstream: f64, grads: &mut ScorerGrads) -> Vec<f64> {
        let s = cache.output;
        let mut delta = vec![upstream * (1.0 - s * s)];
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let (gw, gb) = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, &a) in gw[o * l.input_dim..(o + 1) * l.input_dim].iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            let mut below = vec![0.0; l.input_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (b, &w) in below.iter_mut().zip(&l.weights[o * l.input_dim..(o + 1) * l.input_dim]) {
                    *b += d * w;
                }
            }
            if i > 0 {
                let relu = &cache.relu[i - 1];
                for (j, b) in below.iter_mut().enumerate() {
                    if let Some(m) = &cache.masks[i - 1] {
                        *b *= m[j];
                    }
                    if relu[j] <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = below;
        }
        delta
    }

    pub(crate) fn output(cache: &ScorerCache) -> f64 {
        cache.output
    }
}

impl ScorerGrads {
    pub fn zeros_like(p: &ScorerParams) -> Self {
        ScorerGrads {
            layers: p
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_score_zero() {
        let s = ScorerParams::zeros(6, &[4, 3]);
        assert_eq!(s.forward(&[0.3, -0.2, 0.9, 0.1, 0.0, 1.0]), 0.0);
    }

    #[test]
    fn two_layer_hand_computation() {
        // S = tanh(O relu(U [cq; cd])) with cq = 0.5, cd = -0.25
        let mut s = ScorerParams::zeros(2, &[2]);
        s.layers[0].weights = vec![1.0, 2.0, -1.0, 1.0];
        s.layers[1].weights = vec![0.7, -0.3];
        let x = [0.5, -0.25];
        let h0: f64 = (1.0f64 * 0.5 + 2.0 * -0.25).max(0.0); // 0
        let h1: f64 = (-1.0f64 * 0.5 + 1.0 * -0.25).max(0.0); // 0
        assert_eq!(s.forward(&x), (0.7 * h0 - 0.3 * h1).tanh());
        let x = [1.0, 0.5];
        let want = (0.7f64 * 2.0 + -0.3 * 0.0).tanh();
        assert!((s.forward(&x) - want).abs() < 1e-15);
    }

    #[test]
    fn train_forward_without_dropout_matches_inference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = ScorerParams::glorot(5, &[7, 4], &mut rng);
        let x = [0.1, -0.4, 0.3, 0.9, -0.7];
        let cache = s.forward_train::<ChaCha8Rng>(&x, None);
        assert_eq!(ScorerParams::output(&cache), s.forward(&x));
    }

    #[test]
    fn chain_validation() {
        let mut s = ScorerParams::zeros(4, &[3]);
        assert!(s.validate().is_ok());
        s.layers[1].input_dim = 2;
        assert!(s.validate().is_err());
    }
}
