use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::encoder::{self, ConvCache, ConvGrads, ConvParams, EncodedVec, Pooling};
use crate::error::{Error, Result};
use crate::ranker::scorer::{ScorerGrads, ScorerParams};
use crate::skipgram::EmbeddingMatrix;

/// Which encodings feed the scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TextOnly,
    MetaOnly,
    Joint,
}

impl Mode {
    pub fn uses_text(self) -> bool {
        matches!(self, Mode::TextOnly | Mode::Joint)
    }

    pub fn uses_meta(self) -> bool {
        matches!(self, Mode::MetaOnly | Mode::Joint)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::TextOnly => "text_only",
            Mode::MetaOnly => "meta_only",
            Mode::Joint => "joint",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text_only" => Ok(Mode::TextOnly),
            "meta_only" => Ok(Mode::MetaOnly),
            "joint" => Ok(Mode::Joint),
            _ => Err(Error::Config(format!("unknown mode {s:?} (expected text_only, meta_only or joint)"))),
        }
    }
}

/// Architecture of a rank model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub mode: Mode,
    pub text_window: usize,
    pub text_filters: usize,
    pub cat_window: usize,
    pub cat_filters: usize,
    /// Hidden layer widths of the scorer; the output unit is implicit.
    pub hidden: Vec<usize>,
    pub pooling: Pooling,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            mode: Mode::Joint,
            text_window: 4,
            text_filters: 100,
            cat_window: 1,
            cat_filters: 30,
            hidden: vec![1600, 1600, 1600],
            pooling: Pooling::AllWindows,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.text_window < 1 || self.text_filters < 1 || self.cat_window < 1 || self.cat_filters < 1 {
            return Err(Error::Config("convolution windows and filter counts must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h < 1) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Scorer input width for this mode.
    pub fn input_dim(&self) -> usize {
        let mut d = 0;
        if self.mode.uses_text() {
            d += 2 * self.text_filters;
        }
        if self.mode.uses_meta() {
            d += 2 * self.cat_filters;
        }
        d
    }
}

/// Vocabulary indices of a document's tokens and labels that have embeddings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocFeatures {
    pub text: Vec<usize>,
    pub cats: Vec<usize>,
}

/// Pooled encodings of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    pub text: Option<Vec<f64>>,
    pub cats: Option<Vec<f64>>,
}

impl EncodedDoc {
    /// Text then category encoding, skipping absent parts.
    pub fn parts(&self) -> impl Iterator<Item = f64> + '_ {
        self.text.iter().chain(&self.cats).flatten().copied()
    }
}

struct CachedDoc {
    text: Option<(EncodedVec, ConvCache)>,
    cats: Option<(EncodedVec, ConvCache)>,
}

/// Encoders, scorer and the fixed embeddings they read.
#[derive(Debug, Clone)]
pub struct RankModel {
    pub spec: ModelSpec,
    pub text_conv: Option<ConvParams>,
    pub cat_conv: Option<ConvParams>,
    pub scorer: ScorerParams,
    pub words: Option<Arc<EmbeddingMatrix>>,
    pub categories: Option<Arc<EmbeddingMatrix>>,
}

/// Gradients in the same layout as the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub text_conv: Option<ConvGrads>,
    pub cat_conv: Option<ConvGrads>,
    pub scorer: ScorerGrads,
}

impl Gradients {
    pub fn zeros_like(m: &RankModel) -> Self {
        Gradients {
            text_conv: m.text_conv.as_ref().map(ConvGrads::zeros_like),
            cat_conv: m.cat_conv.as_ref().map(ConvGrads::zeros_like),
            scorer: ScorerGrads::zeros_like(&m.scorer),
        }
    }

    /// Tensors in [`RankModel::parameters`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in [&self.text_conv, &self.cat_conv].into_iter().flatten() {
            out.push(&g.weights);
            out.push(&g.bias);
        }
        for (w, b) in &self.scorer.layers {
            out.push(w);
            out.push(b);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for g in [&mut self.text_conv, &mut self.cat_conv].into_iter().flatten() {
            out.push(&mut g.weights);
            out.push(&mut g.bias);
        }
        for (w, b) in &mut self.scorer.layers {
            out.push(w);
            out.push(b);
        }
        out
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// `max(0, 1 - (s_pos - s_neg))`; NaN scores give NaN rather than 0.
pub fn hinge(s_pos: f64, s_neg: f64) -> f64 {
    let l = 1.0 - (s_pos - s_neg);
    if l < 0.0 {
        0.0
    } else {
        l
    }
}

/// Pairs per parallel work unit. Gradients are summed within a chunk and the
/// chunk sums are added in order, so results do not depend on the thread count.
const CHUNK: usize = 8;

impl RankModel {
    /// A freshly initialised model (Glorot weights, zero biases).
    pub fn new(
        spec: ModelSpec,
        words: Option<Arc<EmbeddingMatrix>>,
        categories: Option<Arc<EmbeddingMatrix>>,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = if spec.mode.uses_text() {
            Some(words.ok_or_else(|| Error::Config(format!("{} model needs word embeddings", spec.mode)))?)
        } else {
            None
        };
        let categories = if spec.mode.uses_meta() {
            Some(categories.ok_or_else(|| Error::Config(format!("{} model needs category embeddings", spec.mode)))?)
        } else {
            None
        };
        let mut conv = |emb: &Option<Arc<EmbeddingMatrix>>, window, filters| {
            emb.as_ref().map(|e| {
                let mut p = ConvParams::glorot(window, e.dim(), filters, &mut rng);
                p.pooling = spec.pooling;
                p
            })
        };
        let text_conv = conv(&words, spec.text_window, spec.text_filters);
        let cat_conv = conv(&categories, spec.cat_window, spec.cat_filters);
        let scorer = ScorerParams::glorot(spec.input_dim(), &spec.hidden, &mut rng);
        let model = RankModel {
            spec,
            text_conv,
            cat_conv,
            scorer,
            words,
            categories,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn mode(&self) -> crate::ranker::Mode {
        self.spec.mode
    }

    /// Checks the mode invariants and that every tensor chains.
    pub fn validate(&self) -> Result<()> {
        let mode = self.spec.mode;
        let pieces = [
            (mode.uses_text(), &self.text_conv, &self.words, "text"),
            (mode.uses_meta(), &self.cat_conv, &self.categories, "category"),
        ];
        for (used, conv, emb, what) in pieces {
            match (used, conv, emb) {
                (true, Some(c), Some(e)) => {
                    c.validate()?;
                    if c.input_dim != e.dim() {
                        return Err(Error::Shape(format!(
                            "{what} convolution reads {}-dim vectors but the embeddings have {}",
                            c.input_dim,
                            e.dim()
                        )));
                    }
                }
                (true, _, _) => return Err(Error::Shape(format!("{mode} model lacks its {what} encoder or embeddings"))),
                (false, None, _) => {}
                (false, Some(_), _) => return Err(Error::Shape(format!("{mode} model must not carry a {what} encoder"))),
            }
        }
        self.scorer.validate()?;
        let want = self.text_conv.as_ref().map_or(0, |c| 2 * c.output_dim) + self.cat_conv.as_ref().map_or(0, |c| 2 * c.output_dim);
        if self.scorer.input_dim() != want {
            return Err(Error::Shape(format!(
                "scorer expects {} inputs but the encoders produce {want}",
                self.scorer.input_dim()
            )));
        }
        Ok(())
    }

    /// Trainable tensors with stable names, in canonical order.
    pub fn parameters(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (name, c) in [("text_conv", &self.text_conv), ("cat_conv", &self.cat_conv)] {
            if let Some(c) = c {
                out.push((format!("{name}.weights"), &c.weights));
                out.push((format!("{name}.bias"), &c.bias));
            }
        }
        for (i, l) in self.scorer.layers.iter().enumerate() {
            out.push((format!("scorer.{i}.weights"), &l.weights));
            out.push((format!("scorer.{i}.bias"), &l.bias));
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for c in [&mut self.text_conv, &mut self.cat_conv].into_iter().flatten() {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        for l in &mut self.scorer.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out
    }

    /// Maps a document onto embedding indices. Tokens without a word vector
    /// are dropped; a meta-consuming model requires at least one label with
    /// a category vector.
    pub fn featurize(&self, doc: &Document) -> Result<DocFeatures> {
        let text = match &self.words {
            Some(w) if self.spec.mode.uses_text() => w.vocab().encode(&doc.tokens),
            _ => Vec::new(),
        };
        let cats = match &self.categories {
            Some(c) if self.spec.mode.uses_meta() => {
                let cats = c.vocab().encode(&doc.meta_labels);
                if cats.is_empty() {
                    return Err(Error::Data(format!(
                        "document {}: no meta label with a category embedding ({} model)",
                        doc.id, self.spec.mode
                    )));
                }
                cats
            }
            _ => Vec::new(),
        };
        Ok(DocFeatures { text, cats })
    }

    fn encode_cached(&self, f: &DocFeatures) -> Result<CachedDoc> {
        let run = |conv: &Option<ConvParams>, emb: &Option<Arc<EmbeddingMatrix>>, idx: &[usize]| -> Result<_> {
            match (conv, emb) {
                (Some(c), Some(e)) => {
                    if let Some(&bad) = idx.iter().find(|&&i| i >= e.rows()) {
                        return Err(Error::Shape(format!("embedding index {bad} out of range ({} rows)", e.rows())));
                    }
                    let rows: Vec<&[f64]> = idx.iter().map(|&i| e.row(i)).collect();
                    encoder::encode_cached(&rows, c).map(Some)
                }
                _ => Ok(None),
            }
        };
        Ok(CachedDoc {
            text: run(&self.text_conv, &self.words, &f.text)?,
            cats: run(&self.cat_conv, &self.categories, &f.cats)?,
        })
    }

    pub fn encode_features(&self, f: &DocFeatures) -> Result<EncodedDoc> {
        let c = self.encode_cached(f)?;
        Ok(EncodedDoc {
            text: c.text.map(|(v, _)| v.c),
            cats: c.cats.map(|(v, _)| v.c),
        })
    }

    pub fn encode(&self, doc: &Document) -> Result<EncodedDoc> {
        self.encode_features(&self.featurize(doc)?)
    }

    /// `[c_q; c_q^cat; c_d; c_d^cat]`, keeping only the parts the mode uses.
    fn scorer_input(&self, q: &EncodedDoc, d: &EncodedDoc) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.scorer.input_dim());
        for e in [q, d] {
            x.extend(e.parts());
        }
        x
    }

    pub fn score_encoded(&self, q: &EncodedDoc, d: &EncodedDoc) -> f64 {
        self.scorer.forward(&self.scorer_input(q, d))
    }

    /// Relevance score in (-1, 1); dropout is off.
    pub fn score(&self, query: &Document, doc: &Document) -> Result<f64> {
        Ok(self.score_encoded(&self.encode(query)?, &self.encode(doc)?))
    }

    /// Scores every candidate and returns them by descending score, ties by
    /// ascending id.
    pub fn rank(&self, query: &Document, candidates: &[&Document]) -> Result<Vec<(String, f64)>> {
        Ok(self.rank_many(&[(query, candidates.to_vec())])?.pop().expect("one query"))
    }

    /// [`rank`](Self::rank) for several queries, encoding each distinct
    /// document once.
    pub fn rank_many(&self, queries: &[(&Document, Vec<&Document>)]) -> Result<Vec<Vec<(String, f64)>>> {
        let mut docs: Vec<&Document> = queries.iter().flat_map(|(_, c)| c.iter().copied()).collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        docs.dedup_by(|a, b| a.id == b.id);
        let halves = docs
            .par_iter()
            .map(|d| {
                let e = self.encode(d)?;
                Ok((d.id.as_str(), self.scorer.doc_half(&e.parts().collect::<Vec<_>>())))
            })
            .collect::<Result<HashMap<&str, Vec<f64>>>>()?;
        queries
            .iter()
            .map(|(query, candidates)| {
                let q = self.encode(query)?;
                let qh = self.scorer.query_half(&q.parts().collect::<Vec<_>>());
                let mut scored: Vec<(String, f64)> = candidates
                    .iter()
                    .map(|d| (d.id.clone(), self.scorer.forward_halves(&qh, &halves[d.id.as_str()])))
                    .collect();
                crate::eval::sort_run(&mut scored);
                Ok(scored)
            })
            .collect()
    }

    /// Mean hinge loss over `(query, positive, negative)` triples, dropout off.
    pub fn batch_loss(&self, batch: &[(&DocFeatures, &DocFeatures, &DocFeatures)]) -> Result<f64> {
        let mut sum = 0.0;
        for (q, p, n) in batch {
            let q = self.encode_features(q)?;
            let sp = self.score_encoded(&q, &self.encode_features(p)?);
            let sn = self.score_encoded(&q, &self.encode_features(n)?);
            sum += hinge(sp, sn);
        }
        Ok(sum / batch.len() as f64)
    }

    /// Mean hinge loss and its gradient. With `dropout = Some((rate, seed))`
    /// pair `i` of the batch draws its masks from substream `i` of `seed`.
    pub fn batch_loss_and_gradients(
        &self,
        batch: &[(&DocFeatures, &DocFeatures, &DocFeatures)],
        dropout: Option<(f64, u64)>,
    ) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let partials = batch
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut g = Gradients::zeros_like(self);
                let mut loss = 0.0;
                for (j, (q, p, n)) in chunk.iter().enumerate() {
                    let mut rng = dropout.map(|(rate, seed)| (rate, crate::util::substream(seed, (c * CHUNK + j) as u64)));
                    loss += self.pair_loss_grad(q, p, n, rng.as_mut().map(|(r, g)| (*r, g)), &mut g)?;
                }
                Ok((loss, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = Gradients::zeros_like(self);
        let mut loss = 0.0;
        for (l, g) in &partials {
            loss += l;
            total.add(g);
        }
        let inv = 1.0 / batch.len() as f64;
        total.scale(inv);
        Ok((loss * inv, total))
    }

    fn pair_loss_grad<R: Rng>(
        &self,
        q: &DocFeatures,
        p: &DocFeatures,
        n: &DocFeatures,
        mut dropout: Option<(f64, &mut R)>,
        grads: &mut Gradients,
    ) -> Result<f64> {
        let qc = self.encode_cached(q)?;
        let pc = self.encode_cached(p)?;
        let nc = self.encode_cached(n)?;
        let plain = |c: &CachedDoc| EncodedDoc {
            text: c.text.as_ref().map(|(v, _)| v.c.clone()),
            cats: c.cats.as_ref().map(|(v, _)| v.c.clone()),
        };
        let qe = plain(&qc);
        let xp = self.scorer_input(&qe, &plain(&pc));
        let xn = self.scorer_input(&qe, &plain(&nc));
        let cp = self.scorer.forward_train(&xp, dropout.as_mut().map(|(r, g)| (*r, &mut **g)));
        let cn = self.scorer.forward_train(&xn, dropout.as_mut().map(|(r, g)| (*r, &mut **g)));
        let loss = hinge(ScorerParams::output(&cp), ScorerParams::output(&cn));
        if loss == 0.0 {
            return Ok(0.0);
        }
        // dL/ds+ = -1, dL/ds- = +1 inside the active hinge.
        let gp = self.scorer.backward(&cp, -1.0, &mut grads.scorer);
        let gn = self.scorer.backward(&cn, 1.0, &mut grads.scorer);
        let (qp, dp) = gp.split_at(gp.len() / 2);
        let (qn, dn) = gn.split_at(gn.len() / 2);
        let q_up: Vec<f64> = qp.iter().zip(qn).map(|(a, b)| a + b).collect();
        self.backward_doc(q, &qc, &q_up, grads);
        self.backward_doc(p, &pc, dp, grads);
        self.backward_doc(n, &nc, dn, grads);
        Ok(loss)
    }

    /// Routes the gradient w.r.t. one document's half of the scorer input
    /// into its encoders.
    fn backward_doc(&self, f: &DocFeatures, cache: &CachedDoc, upstream: &[f64], grads: &mut Gradients) {
        let mut offset = 0;
        let parts = [
            (&self.text_conv, &self.words, &f.text, &cache.text, grads.text_conv.as_mut()),
            (&self.cat_conv, &self.categories, &f.cats, &cache.cats, grads.cat_conv.as_mut()),
        ];
        for (conv, emb, idx, cached, g) in parts {
            if let (Some(c), Some(e), Some((_, cc)), Some(g)) = (conv, emb, cached, g) {
                let rows: Vec<&[f64]> = idx.iter().map(|&i| e.row(i)).collect();
                let up = &upstream[offset..offset + c.output_dim];
                encoder::accumulate_backward(&rows, c, cc, up, g);
                offset += c.output_dim;
            }
        }
    }
}
