//! Skip-gram with negative sampling.
//!
//! One trainer serves both word pretraining (sequences are tokenized
//! documents) and category pretraining (sequences are random walks). The
//! trainer is single-threaded and fully deterministic for a fixed seed.

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::util;

pub use crate::util::cosine;

/// Dense vectors indexed by a vocabulary. `input` rows are the published
/// embeddings; `output` rows exist only for freshly trained matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    output: Option<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vocabulary, dim: usize, input: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        if input.len() != vocab.len() * dim {
            return Err(Error::Shape(format!(
                "{} values for {} rows of dimension {dim}",
                input.len(),
                vocab.len()
            )));
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite embedding value in row {}", i / dim)));
        }
        Ok(EmbeddingMatrix { vocab, dim, input, output: None })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.vocab.len()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.input[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(|i| self.row(i))
    }

    pub fn output_row(&self, index: usize) -> Option<&[f64]> {
        self.output.as_ref().map(|o| &o[index * self.dim..(index + 1) * self.dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.input
    }

    /// Drops the training-time context vectors.
    pub fn without_output(mut self) -> Self {
        self.output = None;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Frequent-token downsampling threshold; 0 disables it.
    pub subsample_threshold: f64,
    /// Rows are rescaled to at most this L2 norm after every epoch.
    pub max_norm: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            subsample_threshold: 1e-3,
            max_norm: 100.0,
            seed: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("skip-gram: {m}")));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.window < 1 {
            return bad("window must be at least 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be at least 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr > 0.0) {
            return bad("initial_lr must be positive");
        }
        if !(self.subsample_threshold >= 0.0) {
            return bad("subsample_threshold must be non-negative");
        }
        if !(self.max_norm > 0.0) {
            return bad("max_norm must be positive");
        }
        Ok(())
    }
}

/// Draws token indices proportionally to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NoiseSampler {
    pub fn new(counts: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::Data(format!("noise distribution: {e}")))?;
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(NoiseSampler { dist, probs })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Log-likelihood of one (center, context) observation with its noise
/// samples: `log σ(u_c·v) + Σ log σ(−u_n·v)`.
pub fn pair_objective(center: &[f64], context: &[f64], noise: &[&[f64]]) -> f64 {
    log_sigmoid(util::dot(context, center)) + noise.iter().map(|u| log_sigmoid(-util::dot(u, center))).sum::<f64>()
}

/// Gradients of [`pair_objective`] with respect to the center vector, the
/// context vector and every noise vector.
pub fn pair_gradients(center: &[f64], context: &[f64], noise: &[&[f64]]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let mut d_center = vec![0.0; center.len()];
    let g = 1.0 - sigmoid(util::dot(context, center));
    for (dc, &u) in d_center.iter_mut().zip(context) {
        *dc += g * u;
    }
    let d_context = center.iter().map(|v| g * v).collect();
    let mut d_noise = Vec::with_capacity(noise.len());
    for u in noise {
        let g = -sigmoid(util::dot(u, center));
        for (dc, &un) in d_center.iter_mut().zip(u.iter()) {
            *dc += g * un;
        }
        d_noise.push(center.iter().map(|v| g * v).collect());
    }
    (d_center, d_context, d_noise)
}

/// One ascent step on a single target (`label` 1 for the observed context,
/// 0 for noise). Accumulates the center-vector update into `center_grad`.
fn ascend(center: &[f64], output: &mut [f64], label: f64, lr: f64, center_grad: &mut [f64]) {
    let g = lr * (label - sigmoid(util::dot(output, center)));
    for ((cg, o), &c) in center_grad.iter_mut().zip(output.iter_mut()).zip(center) {
        *cg += g * *o;
        *o += g * c;
    }
}

/// Trains skip-gram with negative sampling over `sequences` of vocabulary
/// indices.
///
/// Every (center, context) pair within `cfg.window` gets one positive update
/// and `cfg.negatives` noise updates (a noise draw equal to the context is
/// skipped). The learning rate decays linearly from `initial_lr` to
/// `initial_lr * 1e-4` over the total number of pairs.
pub fn train_sgns(sequences: &[Vec<usize>], vocab: Vocabulary, cfg: &SgnsConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let n = vocab.len();
    if n < cfg.negatives + 1 {
        return Err(Error::Data(format!(
            "vocabulary of {n} entries is too small for {} negatives",
            cfg.negatives
        )));
    }
    let mut freq = vec![0u64; n];
    for seq in sequences {
        for &t in seq {
            if t >= n {
                return Err(Error::Data(format!("token index {t} outside vocabulary of {n}")));
            }
            freq[t] += 1;
        }
    }
    if !sequences.iter().any(|s| s.len() >= 2) {
        return Err(Error::Data("skip-gram needs at least one sequence of length 2".into()));
    }
    let total: u64 = freq.iter().sum();
    let noise = NoiseSampler::new(&freq)?;
    let keep_prob: Vec<f64> = freq
        .iter()
        .map(|&f| {
            if cfg.subsample_threshold == 0.0 || f == 0 {
                1.0
            } else {
                let scaled = cfg.subsample_threshold * total as f64;
                (((f as f64 / scaled).sqrt() + 1.0) * scaled / f as f64).min(1.0)
            }
        })
        .collect();

    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-bound..bound)).collect();
    let mut output = vec![0.0; n * dim];

    // Subsampling is drawn up front so the decay schedule knows the exact pair count.
    let mut epochs: Vec<Vec<Vec<usize>>> = Vec::with_capacity(cfg.epochs);
    let mut total_pairs: u64 = 0;
    for _ in 0..cfg.epochs {
        let mut kept_seqs = Vec::with_capacity(sequences.len());
        for seq in sequences {
            let kept: Vec<usize> = seq
                .iter()
                .copied()
                .filter(|&t| keep_prob[t] >= 1.0 || rng.random::<f64>() < keep_prob[t])
                .collect();
            total_pairs += context_pairs(kept.len(), cfg.window);
            kept_seqs.push(kept);
        }
        epochs.push(kept_seqs);
    }

    let min_lr = cfg.initial_lr * 1e-4;
    let mut processed: u64 = 0;
    let mut center = vec![0.0; dim];
    let mut center_grad = vec![0.0; dim];
    for (epoch, seqs) in epochs.iter().enumerate() {
        for seq in seqs {
            for (i, &w) in seq.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(seq.len());
                for (j, &c) in seq.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let progress = processed as f64 / total_pairs as f64;
                    let lr = (cfg.initial_lr * (1.0 - progress)).max(min_lr);
                    processed += 1;

                    center.copy_from_slice(&input[w * dim..(w + 1) * dim]);
                    center_grad.iter_mut().for_each(|g| *g = 0.0);
                    ascend(&center, &mut output[c * dim..(c + 1) * dim], 1.0, lr, &mut center_grad);
                    for _ in 0..cfg.negatives {
                        let neg = noise.sample(&mut rng);
                        if neg == c {
                            continue;
                        }
                        ascend(&center, &mut output[neg * dim..(neg + 1) * dim], 0.0, lr, &mut center_grad);
                    }
                    for (v, g) in input[w * dim..(w + 1) * dim].iter_mut().zip(&center_grad) {
                        *v += g;
                    }
                }
            }
        }
        clip_rows(&mut input, dim, cfg.max_norm);
        clip_rows(&mut output, dim, cfg.max_norm);
        if input.iter().chain(&output).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("skip-gram diverged during epoch {}", epoch + 1)));
        }
    }

    let mut m = EmbeddingMatrix::new(vocab, dim, input)?;
    m.output = Some(output);
    Ok(m)
}

fn context_pairs(len: usize, window: usize) -> u64 {
    (0..len)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(len);
            (hi - lo - 1) as u64
        })
        .sum()
}

fn clip_rows(values: &mut [f64], dim: usize, max_norm: f64) {
    for row in values.chunks_mut(dim) {
        let norm = util::dot(row, row).sqrt();
        if norm > max_norm {
            let s = max_norm / norm;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Writes the word2vec text format: `count dim` header, then
/// `token v1 .. v_dim` per row at 17 significant digits.
pub fn save_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut w = util::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", m.rows(), m.dim).map_err(io)?;
    for i in 0..m.rows() {
        write!(w, "{}", m.vocab.token(i)).map_err(io)?;
        for v in m.row(i) {
            write!(w, " {v:.16e}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the word2vec text format. Trailing whitespace is tolerated.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let loc = path.display().to_string();
    let mut lines = util::open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| Error::parse(&loc, 1, "empty embedding file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (count, dim): (usize, usize) = match parts.as_slice() {
        [c, d] => (
            c.parse().map_err(|_| Error::parse(&loc, 1, format!("bad row count {c:?}")))?,
            d.parse().map_err(|_| Error::parse(&loc, 1, format!("bad dimension {d:?}")))?,
        ),
        _ => return Err(Error::parse(&loc, 1, "malformed header; expected `count dim`")),
    };
    if dim == 0 {
        return Err(Error::parse(&loc, 1, "dimension must be positive"));
    }
    let mut tokens = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count * dim);
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        let row: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(&loc, line_no, format!("bad value {f:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(Error::parse(
                &loc,
                line_no,
                format!("dimension mismatch: header says {dim}, row has {}", row.len()),
            ));
        }
        tokens.push(token.to_string());
        values.extend(row);
    }
    if tokens.len() != count {
        return Err(Error::parse(&loc, 1, format!("header declares {count} rows, file has {}", tokens.len())));
    }
    let counts = vec![0; tokens.len()];
    EmbeddingMatrix::new(Vocabulary::from_parts(tokens, counts)?, dim, values)
}
