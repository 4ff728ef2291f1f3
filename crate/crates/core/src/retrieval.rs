//! tf-idf retrieval: inverted index, candidate pre-selection and weighted
//! reranking of model scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Judgments};
use crate::error::{Error, Result};
use crate::eval::{ndcg, sort_run, Gain};
use crate::util;

const INDEX_HEADER: &str = "catrank-index";
pub const INDEX_VERSION: u32 = 1;

/// Term postings over a document collection. Documents are numbered in
/// ascending id order and every postings list is sorted by that number.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lengths: Vec<usize>,
    by_id: HashMap<String, usize>,
    postings: BTreeMap<String, Vec<(usize, u32)>>,
}

impl InvertedIndex {
    pub fn build<'a, I: IntoIterator<Item = &'a Document>>(docs: I) -> Result<Self> {
        let mut docs: Vec<&Document> = docs.into_iter().collect();
        if docs.is_empty() {
            return Err(Error::Data("cannot index an empty collection".into()));
        }
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Data(format!("duplicate document id {} in index input", w[0].id)));
        }
        let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        for (i, d) in docs.iter().enumerate() {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &d.tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, c) in tf {
                postings.entry(t.to_string()).or_default().push((i, c));
            }
        }
        Ok(Self::from_parts(
            docs.iter().map(|d| d.id.clone()).collect(),
            docs.iter().map(|d| d.tokens.len()).collect(),
            postings,
        ))
    }

    fn from_parts(doc_ids: Vec<String>, doc_lengths: Vec<usize>, postings: BTreeMap<String, Vec<(usize, u32)>>) -> Self {
        let by_id = doc_ids.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
        InvertedIndex {
            doc_ids,
            doc_lengths,
            by_id,
            postings,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.by_id.contains_key(doc_id)
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).map(|&i| self.doc_lengths[i])
    }

    /// `(doc_id, tf)` pairs for `term`, in doc-id order.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, u32)> {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|&(i, tf)| (self.doc_ids[i].as_str(), tf))
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn tf(&self, term: &str, doc_id: &str) -> u32 {
        let (Some(list), Some(&i)) = (self.postings.get(term), self.by_id.get(doc_id)) else {
            return 0;
        };
        list.binary_search_by_key(&i, |&(d, _)| d).map_or(0, |k| list[k].1)
    }

    /// `ln((N + 1) / (df + 1) + 1)`
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        ((n + 1.0) / (self.df(term) as f64 + 1.0) + 1.0).ln()
    }

    /// `sum over distinct query terms of tf(t, d) * idf(t)`.
    pub fn score(&self, query_tokens: &[String], doc_id: &str) -> Result<f64> {
        if !self.contains(doc_id) {
            return Err(Error::Data(format!("document {doc_id} is not in the index")));
        }
        let terms: BTreeSet<&str> = query_tokens.iter().map(String::as_str).collect();
        Ok(terms.into_iter().map(|t| f64::from(self.tf(t, doc_id)) * self.idf(t)).sum())
    }

    /// Scores of every indexed document, in index order. Accumulates terms
    /// in the same order as [`score`](Self::score), so values agree exactly.
    pub fn score_all(&self, query_tokens: &[String]) -> Vec<f64> {
        let terms: BTreeSet<&str> = query_tokens.iter().map(String::as_str).collect();
        let mut acc = vec![0.0; self.doc_count()];
        for t in terms {
            let idf = self.idf(t);
            for &(i, tf) in self.postings.get(t).into_iter().flatten() {
                acc[i] += f64::from(tf) * idf;
            }
        }
        acc
    }

    /// Versioned text format: header, one `id<TAB>length` line per document,
    /// then one `term<TAB>doc:tf,doc:tf...` line per term.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{INDEX_HEADER} {INDEX_VERSION}").unwrap();
        writeln!(out, "docs {}", self.doc_count()).unwrap();
        for (d, l) in self.doc_ids.iter().zip(&self.doc_lengths) {
            writeln!(out, "{d}\t{l}").unwrap();
        }
        writeln!(out, "terms {}", self.postings.len()).unwrap();
        for (t, list) in &self.postings {
            let body: Vec<String> = list.iter().map(|(i, tf)| format!("{i}:{tf}")).collect();
            writeln!(out, "{t}\t{}", body.join(",")).unwrap();
        }
        util::write_file(path, out.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let loc = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::parse(&loc, 0, format!("file ends before {what}")));

        let (n, header) = next("header")?;
        let version = header
            .strip_prefix(INDEX_HEADER)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::parse(&loc, n, "not an index file"))?;
        if version != INDEX_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let count = |line: (usize, &str), key: &str| -> Result<usize> {
            line.1
                .strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::parse(&loc, line.0, format!("expected `{key} <count>`")))
        };
        let docs = count(next("document count")?, "docs")?;
        let mut doc_ids = Vec::with_capacity(docs);
        let mut doc_lengths = Vec::with_capacity(docs);
        for _ in 0..docs {
            let (n, l) = next("document line")?;
            let (id, len) = l.split_once('\t').ok_or_else(|| Error::parse(&loc, n, "expected id<TAB>length"))?;
            doc_ids.push(id.to_string());
            doc_lengths.push(len.parse().map_err(|_| Error::parse(&loc, n, "bad document length"))?);
        }
        let terms = count(next("term count")?, "terms")?;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let (n, l) = next("term line")?;
            let (t, body) = l.split_once('\t').ok_or_else(|| Error::parse(&loc, n, "expected term<TAB>postings"))?;
            let list = body
                .split(',')
                .map(|p| {
                    let (i, tf) = p.split_once(':')?;
                    let i: usize = i.parse().ok().filter(|&i| i < docs)?;
                    Some((i, tf.parse().ok()?))
                })
                .collect::<Option<Vec<(usize, u32)>>>()
                .ok_or_else(|| Error::parse(&loc, n, "bad posting"))?;
            postings.insert(t.to_string(), list);
        }
        Ok(Self::from_parts(doc_ids, doc_lengths, postings))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Preselected,
    /// Drawn uniformly from the irrelevant documents.
    Sampled,
    InjectedRelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub tfidf: f64,
    pub provenance: Provenance,
}

/// Documents a query is ranked against: the top-n irrelevant documents by
/// tf-idf followed by every relevant document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.doc_id.as_str())
    }

    /// Candidates ordered by tf-idf alone.
    pub fn tfidf_ranking(&self) -> Vec<(String, f64)> {
        let mut r: Vec<(String, f64)> = self.candidates.iter().map(|c| (c.doc_id.clone(), c.tfidf)).collect();
        sort_run(&mut r);
        r
    }
}

/// Top `n` documents judged irrelevant (grade 0 or unjudged) by tf-idf,
/// ties by id, then every relevant document of the query.
pub fn preselect(index: &InvertedIndex, query: &Document, n: usize, judgments: &Judgments) -> Result<CandidateSet> {
    if n < 1 {
        return Err(Error::Config("candidate size n must be at least 1".into()));
    }
    let scores = index.score_all(&query.tokens);
    let mut irrelevant: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| judgments.grade(&query.id, &index.doc_ids[*i]) == 0)
        .map(|(i, &s)| (i, s))
        .collect();
    irrelevant.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if irrelevant.len() < n {
        log::debug!("query {}: only {} irrelevant documents for n = {n}", query.id, irrelevant.len());
    }
    let mut candidates: Vec<Candidate> = irrelevant
        .iter()
        .take(n)
        .map(|&(i, s)| Candidate {
            doc_id: index.doc_ids[i].clone(),
            tfidf: s,
            provenance: Provenance::Preselected,
        })
        .collect();
    for (d, _) in judgments.relevant(&query.id) {
        let Some(&i) = index.by_id.get(d) else {
            return Err(Error::Data(format!("query {}: relevant document {d} is not in the index", query.id)));
        };
        candidates.push(Candidate {
            doc_id: d.to_string(),
            tfidf: scores[i],
            provenance: Provenance::InjectedRelevant,
        });
    }
    Ok(CandidateSet {
        query_id: query.id.clone(),
        candidates,
    })
}

/// `n` irrelevant documents drawn uniformly from `pool` followed by every
/// relevant document. The draw for a query depends only on `seed` and the
/// query id. tf-idf scores are filled in when an index is given.
pub fn sample_candidates(
    pool: &[&str],
    query: &Document,
    n: usize,
    judgments: &Judgments,
    index: Option<&InvertedIndex>,
    seed: u64,
) -> Result<CandidateSet> {
    if n < 1 {
        return Err(Error::Config("candidate size n must be at least 1".into()));
    }
    let mut irrelevant: Vec<&str> = pool.iter().copied().filter(|d| judgments.grade(&query.id, d) == 0).collect();
    irrelevant.sort_unstable();
    irrelevant.dedup();
    if irrelevant.len() < n {
        log::debug!("query {}: only {} irrelevant documents for n = {n}", query.id, irrelevant.len());
    }
    let mut rng = util::substream(seed, util::fnv1a(&query.id));
    let mut picked = rand::seq::index::sample(&mut rng, irrelevant.len(), n.min(irrelevant.len())).into_vec();
    picked.sort_unstable();
    let tfidf = |d: &str| index.map_or(Ok(0.0), |ix| ix.score(&query.tokens, d));
    let mut candidates = Vec::with_capacity(picked.len());
    for i in picked {
        candidates.push(Candidate {
            doc_id: irrelevant[i].to_string(),
            tfidf: tfidf(irrelevant[i])?,
            provenance: Provenance::Sampled,
        });
    }
    for (d, _) in judgments.relevant(&query.id) {
        candidates.push(Candidate {
            doc_id: d.to_string(),
            tfidf: tfidf(d)?,
            provenance: Provenance::InjectedRelevant,
        });
    }
    Ok(CandidateSet {
        query_id: query.id.clone(),
        candidates,
    })
}

/// Per-query min-max of tf-idf onto [-1, 1]; all zeros when the scores are
/// constant.
pub fn normalize_tfidf(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
}

/// Ranks candidates by `lambda * normalized tf-idf + (1 - lambda) * model score`.
pub fn weighted_rerank(set: &CandidateSet, model_scores: &HashMap<String, f64>, lambda: f64) -> Result<Vec<(String, f64)>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
    }
    let tfidf: Vec<f64> = set.candidates.iter().map(|c| c.tfidf).collect();
    let norm = normalize_tfidf(&tfidf);
    let mut out = Vec::with_capacity(set.candidates.len());
    for (c, n) in set.candidates.iter().zip(norm) {
        let m = model_scores
            .get(&c.doc_id)
            .ok_or_else(|| Error::Data(format!("query {}: no model score for {}", set.query_id, c.doc_id)))?;
        out.push((c.doc_id.clone(), lambda * n + (1.0 - lambda) * m));
    }
    sort_run(&mut out);
    Ok(out)
}

/// `{0, step, 2 step, ..., 1}`; `1 / step` must be a whole number.
pub fn linear_sweep(step: f64) -> Result<Vec<f64>> {
    let n = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || ((n * step) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("grid step {step} must divide 1")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: f64,
    pub best_ndcg: f64,
    /// `(weight, mean dev NDCG)` for every grid point.
    pub sweep: Vec<(f64, f64)>,
}

/// Evaluates `objective` on each weight and returns the maximiser; ties go
/// to the smaller weight.
pub fn grid_search<F: Fn(f64) -> Result<f64>>(grid: &[f64], objective: F) -> Result<GridResult> {
    let mut sweep = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &w in grid {
        let v = objective(w)?;
        sweep.push((w, v));
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((w, v));
        }
    }
    let (best, best_ndcg) = best.ok_or_else(|| Error::Config("empty grid".into()))?;
    Ok(GridResult { best, best_ndcg, sweep })
}

/// One dev query: its candidate set and the model score of every candidate.
#[derive(Debug, Clone)]
pub struct RerankDev {
    pub candidates: CandidateSet,
    pub model_scores: HashMap<String, f64>,
}

/// Mean NDCG of the weighted reranking at `lambda` over queries with a
/// relevant document.
pub fn rerank_ndcg(dev: &[RerankDev], judgments: &Judgments, lambda: f64, gain: Gain) -> Result<f64> {
    let mut values = Vec::new();
    for q in dev {
        let ranking = weighted_rerank(&q.candidates, &q.model_scores, lambda)?;
        let Some(grades) = judgments.for_query(&q.candidates.query_id) else { continue };
        let ids: Vec<&str> = ranking.iter().map(|(d, _)| d.as_str()).collect();
        if let Some(v) = ndcg(&ids, grades, gain) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::Data("no dev query with a relevant candidate".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Grid search of `lambda` on dev.
pub fn grid_search_lambda(dev: &[RerankDev], judgments: &Judgments, step: f64, gain: Gain) -> Result<GridResult> {
    if dev.is_empty() {
        return Err(Error::Data("empty dev set".into()));
    }
    grid_search(&linear_sweep(step)?, |l| rerank_ndcg(dev, judgments, l, gain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;

    fn doc(id: &str, text: &str) -> Document {
        Document::from_text(id, Side::Target, text, Vec::<String>::new()).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn single_doc_counts() {
        let d = doc("d", "a a b");
        let idx = InvertedIndex::build([&d]).unwrap();
        assert_eq!(idx.tf("a", "d"), 2);
        assert_eq!(idx.tf("b", "d"), 1);
        assert_eq!(idx.df("a"), 1);
        assert_eq!(idx.df("b"), 1);
        assert_eq!(idx.postings("zzz").count(), 0);
    }

    #[test]
    fn single_doc_idf_is_ln2() {
        let d = doc("d", "a");
        let idx = InvertedIndex::build([&d]).unwrap();
        assert_eq!(idx.score(&toks("a"), "d").unwrap(), 2f64.ln());
        assert_eq!(idx.score(&toks("x"), "d").unwrap(), 0.0);
    }

    #[test]
    fn duplicates_and_empty_rejected() {
        let d = doc("d", "a");
        assert!(InvertedIndex::build([&d, &d]).is_err());
        assert!(InvertedIndex::build(std::iter::empty::<&Document>()).is_err());
    }

    #[test]
    fn preselect_takes_everything_when_n_is_large() {
        let docs = [doc("a", "x y"), doc("b", "y"), doc("c", "z")];
        let idx = InvertedIndex::build(&docs).unwrap();
        let mut j = Judgments::new();
        j.insert("q", "c", 1).unwrap();
        let q = Document::from_text("q", Side::Query, "y", Vec::<String>::new()).unwrap();
        let set = preselect(&idx, &q, 100, &j).unwrap();
        let ids: Vec<&str> = set.doc_ids().collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(set.candidates[2].provenance, Provenance::InjectedRelevant);
    }

    #[test]
    fn lambda_half_hand_computed() {
        let set = CandidateSet {
            query_id: "q".into(),
            candidates: vec![
                Candidate { doc_id: "a".into(), tfidf: 0.0, provenance: Provenance::Preselected },
                Candidate { doc_id: "b".into(), tfidf: 1.0, provenance: Provenance::Preselected },
                Candidate { doc_id: "c".into(), tfidf: 2.0, provenance: Provenance::Preselected },
            ],
        };
        // normalized: a -1, b 0, c 1
        let m: HashMap<String, f64> = [("a".into(), 0.9), ("b".into(), 0.5), ("c".into(), -0.9)].into();
        // a: -0.05, b: 0.25, c: 0.05
        let r = weighted_rerank(&set, &m, 0.5).unwrap();
        let ids: Vec<&str> = r.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
    }

    #[test]
    fn sweep_has_21_points() {
        let g = linear_sweep(0.05).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 1.0);
        assert!(linear_sweep(0.3).is_err());
    }

    #[test]
    fn grid_ties_go_to_smaller_weight() {
        let r = grid_search(&linear_sweep(0.25).unwrap(), |_| Ok(0.5)).unwrap();
        assert_eq!(r.best, 0.0);
        let r = grid_search(&linear_sweep(0.25).unwrap(), |w| Ok(if w >= 0.5 { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(r.best, 0.5);
    }

    #[test]
    fn index_file_roundtrip() {
        let docs = [doc("a", "x y y"), doc("b", "y z")];
        let idx = InvertedIndex::build(&docs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("index.txt");
        idx.save(&p).unwrap();
        assert_eq!(InvertedIndex::load(&p).unwrap(), idx);
    }
}
