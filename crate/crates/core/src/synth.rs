//! Planted-signal corpora for end-to-end experiments.
//!
//! Every query is assigned a topic (a small set of tokens) and a category
//! cluster; topics are shared by several queries so that train and test
//! queries draw on the same vocabulary. A relevant document can carry the
//! text signal (tokens of the query's topic), the category signal (labels
//! from the query's cluster), or both. Irrelevant documents draw their
//! topic from the query topics plus a pool of filler topics that no query
//! uses, and their cluster likewise from the query clusters plus any filler
//! clusters. Category labels
//! live in two namespaces, `src:` for queries and `tgt:` for documents,
//! joined by the graph and by the translation map.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{save_edge_list, write_corpus_records, Corpus, Document, Judgments, Side, Splits, TranslationMap};
use crate::error::{Error, Result};

/// How signals are assigned to relevant documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignalMode {
    /// Each relevant document is relevant through its text with probability
    /// `text_fraction` and through its category otherwise. Text-relevant
    /// documents also carry the query's cluster with probability
    /// `category_with_text`; category-relevant ones never carry the topic.
    Split {
        text_fraction: f64,
        #[serde(default)]
        category_with_text: f64,
    },
    /// Grade follows the signals: the grade 2 document carries both, each
    /// grade 1 document carries the text signal with probability
    /// `text_fraction` and the category signal otherwise.
    Graded { text_fraction: f64 },
    /// Text and category signals each present with their own probability.
    Independent { text_prob: f64, category_prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub queries: usize,
    /// Target documents, relevant ones included.
    pub documents: usize,
    /// `(train, dev)` query counts; the rest are test queries.
    pub train_queries: usize,
    pub dev_queries: usize,
    /// Topics assigned to queries, round robin; 0 gives every query its own.
    pub topics: usize,
    /// Extra topics used only by irrelevant documents.
    pub filler_topics: usize,
    pub tokens_per_topic: usize,
    pub background_tokens: usize,
    pub query_topic_tokens: usize,
    pub query_background_tokens: usize,
    pub doc_topic_tokens: usize,
    pub doc_background_tokens: usize,
    /// Clusters assigned to queries.
    pub clusters: usize,
    /// Extra clusters used only by irrelevant documents.
    pub filler_clusters: usize,
    pub labels_per_cluster: usize,
    pub query_labels: usize,
    pub doc_labels: usize,
    /// Random edges between labels of different clusters.
    pub cross_edges: usize,
    /// Lesser-relevant (grade 1) documents per query are drawn from this
    /// inclusive range; every query has one grade 2 document.
    pub min_grade1: usize,
    pub max_grade1: usize,
    pub signal: SignalMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            queries: 300,
            documents: 3000,
            train_queries: 200,
            dev_queries: 50,
            topics: 100,
            filler_topics: 200,
            tokens_per_topic: 8,
            background_tokens: 300,
            query_topic_tokens: 6,
            query_background_tokens: 4,
            doc_topic_tokens: 8,
            doc_background_tokens: 10,
            clusters: 60,
            filler_clusters: 0,
            labels_per_cluster: 8,
            query_labels: 3,
            doc_labels: 3,
            cross_edges: 60,
            min_grade1: 1,
            max_grade1: 3,
            signal: SignalMode::Graded { text_fraction: 0.7 },
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// A 40-query, 200-document corpus for quick end-to-end runs.
    pub fn small() -> Self {
        SynthConfig {
            queries: 40,
            documents: 200,
            train_queries: 24,
            dev_queries: 8,
            topics: 12,
            filler_topics: 24,
            clusters: 10,
            filler_clusters: 0,
            background_tokens: 60,
            cross_edges: 8,
            ..Default::default()
        }
    }

    /// Text and category signals each present on 95% of the relevant
    /// documents, independently, with enough clusters that either signal
    /// alone ranks well.
    pub fn independent() -> Self {
        SynthConfig {
            clusters: 150,
            filler_clusters: 150,
            cross_edges: 150,
            signal: SignalMode::Independent {
                text_prob: 0.95,
                category_prob: 0.95,
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.queries < 3 || self.train_queries + self.dev_queries >= self.queries || self.train_queries == 0 || self.dev_queries == 0 {
            return bad("need at least one train, dev and test query");
        }
        if self.documents < self.queries * (1 + self.max_grade1) {
            return bad("too few documents for the relevant documents of every query");
        }
        if self.clusters < 2 || self.labels_per_cluster < 1 || self.tokens_per_topic < 1 || self.background_tokens < 1 {
            return bad("need at least two clusters and nonempty token sets");
        }
        if self.topics.max(self.queries) + self.filler_topics < 2 {
            return bad("need at least two topics");
        }
        if self.query_labels < 1 || self.doc_labels < 1 || self.min_grade1 > self.max_grade1 {
            return bad("label counts must be positive and min_grade1 <= max_grade1");
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        let ok = match self.signal {
            SignalMode::Split {
                text_fraction,
                category_with_text,
            } => unit(text_fraction) && unit(category_with_text),
            SignalMode::Graded { text_fraction } => unit(text_fraction),
            SignalMode::Independent { text_prob, category_prob } => unit(text_prob) && unit(category_prob),
        };
        if !ok {
            return bad("signal probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

/// A generated corpus with everything the pipeline reads.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// `(id, side, text, labels)` in file order.
    pub records: Vec<(String, Side, String, Vec<String>)>,
    pub judgments: Judgments,
    pub edges: Vec<(String, String)>,
    pub translation: TranslationMap,
    pub splits: Splits,
}

fn topic_token(topic: usize, j: usize) -> String {
    format!("tp{topic}x{j}")
}

fn label(side: &str, cluster: usize, j: usize) -> String {
    format!("{side}:c{cluster}_l{j}")
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn other(&mut self, n: usize, not: usize) -> usize {
        let k = self.rng.random_range(0..n - 1);
        if k >= not {
            k + 1
        } else {
            k
        }
    }

    fn text(&mut self, topic: usize, topic_tokens: usize, background: usize) -> String {
        let mut words: Vec<String> = (0..topic_tokens)
            .map(|_| topic_token(topic, self.rng.random_range(0..self.cfg.tokens_per_topic)))
            .collect();
        for _ in 0..background {
            words.push(format!("bg{}", self.rng.random_range(0..self.cfg.background_tokens)));
        }
        words.shuffle(&mut self.rng);
        words.join(" ")
    }

    fn labels(&mut self, side: &str, cluster: usize, n: usize) -> Vec<String> {
        let n = n.min(self.cfg.labels_per_cluster);
        let mut picked = rand::seq::index::sample(&mut self.rng, self.cfg.labels_per_cluster, n).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|j| label(side, cluster, j)).collect()
    }
}

/// Generates a corpus; identical configurations give identical corpora.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let topics = if cfg.topics == 0 { cfg.queries } else { cfg.topics };
    let all_topics = topics + cfg.filler_topics;
    let all_clusters = cfg.clusters + cfg.filler_clusters;
    let mut records = Vec::new();
    // (owner query, grade, topic, cluster) for every target document.
    let mut targets: Vec<(Option<usize>, u8, usize, usize)> = Vec::new();
    let mut query_meta = Vec::with_capacity(cfg.queries);
    // Balanced cluster assignment: every cluster serves about the same
    // number of queries, in shuffled order.
    let mut query_clusters: Vec<usize> = (0..cfg.queries).map(|q| q % cfg.clusters).collect();
    query_clusters.shuffle(&mut g.rng);
    for q in 0..cfg.queries {
        let cluster = query_clusters[q];
        query_meta.push((q, cluster));
        let grade1 = g.rng.random_range(cfg.min_grade1..=cfg.max_grade1);
        for k in 0..=grade1 {
            let grade = if k == 0 { 2 } else { 1 };
            let (text, cat) = match cfg.signal {
                SignalMode::Split {
                    text_fraction,
                    category_with_text,
                } => {
                    let t = g.rng.random_bool(text_fraction);
                    let c = g.rng.random_bool(category_with_text);
                    (t, !t || c)
                }
                SignalMode::Graded { .. } if grade == 2 => (true, true),
                SignalMode::Graded { text_fraction } => {
                    let t = g.rng.random_bool(text_fraction);
                    (t, !t)
                }
                SignalMode::Independent { text_prob, category_prob } => {
                    (g.rng.random_bool(text_prob), g.rng.random_bool(category_prob))
                }
            };
            let own = q % topics;
            let topic = if text { own } else { g.other(all_topics, own) };
            let c = if cat { cluster } else { g.other(all_clusters, cluster) };
            targets.push((Some(q), grade, topic, c));
        }
    }
    while targets.len() < cfg.documents {
        let topic = g.rng.random_range(0..all_topics);
        let c = g.rng.random_range(0..all_clusters);
        targets.push((None, 0, topic, c));
    }
    targets.shuffle(&mut g.rng);

    let qid = |q: usize| format!("q{q:04}");
    for &(q, cluster) in &query_meta {
        let text = g.text(q % topics, cfg.query_topic_tokens, cfg.query_background_tokens);
        let labels = g.labels("src", cluster, cfg.query_labels);
        records.push((qid(q), Side::Query, text, labels));
    }
    let mut judgments = Judgments::new();
    for (i, &(owner, grade, topic, cluster)) in targets.iter().enumerate() {
        let id = format!("d{i:05}");
        let text = g.text(topic, cfg.doc_topic_tokens, cfg.doc_background_tokens);
        let labels = g.labels("tgt", cluster, cfg.doc_labels);
        if let Some(q) = owner {
            judgments.insert(&qid(q), &id, grade)?;
        }
        records.push((id, Side::Target, text, labels));
    }

    let mut edges = Vec::new();
    let mut translation = TranslationMap::new();
    for c in 0..all_clusters {
        for a in 0..cfg.labels_per_cluster {
            for side in ["src", "tgt"] {
                for b in a + 1..cfg.labels_per_cluster {
                    edges.push((label(side, c, a), label(side, c, b)));
                }
            }
            edges.push((label("src", c, a), label("tgt", c, a)));
            translation.insert(&label("src", c, a), &label("tgt", c, a));
        }
    }
    for _ in 0..cfg.cross_edges {
        let c1 = g.rng.random_range(0..all_clusters);
        let c2 = g.other(all_clusters, c1);
        let side = if g.rng.random_bool(0.5) { "src" } else { "tgt" };
        let a = label(side, c1, g.rng.random_range(0..cfg.labels_per_cluster));
        let b = label(side, c2, g.rng.random_range(0..cfg.labels_per_cluster));
        edges.push((a, b));
    }

    let ids: Vec<String> = (0..cfg.queries).map(qid).collect();
    let splits = Splits {
        train: ids[..cfg.train_queries].to_vec(),
        dev: ids[cfg.train_queries..cfg.train_queries + cfg.dev_queries].to_vec(),
        test: ids[cfg.train_queries + cfg.dev_queries..].to_vec(),
    };
    Ok(SynthCorpus {
        records,
        judgments,
        edges,
        translation,
        splits,
    })
}

impl SynthCorpus {
    pub fn corpus(&self) -> Result<Corpus> {
        let docs = self
            .records
            .iter()
            .map(|(id, side, text, labels)| Document::from_text(id.as_str(), *side, text, labels.iter().cloned()))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(docs)
    }

    /// Writes `corpus.jsonl`, `qrels.txt`, `splits.txt`, `graph.txt` and
    /// `translation.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_corpus_records(
            &dir.join("corpus.jsonl"),
            self.records.iter().map(|(id, side, text, labels)| (id.as_str(), *side, text.as_str(), labels.as_slice())),
        )?;
        self.judgments.save(&dir.join("qrels.txt"))?;
        self.splits.save(&dir.join("splits.txt"))?;
        save_edge_list(&dir.join("graph.txt"), &self.edges)?;
        self.translation.save(&dir.join("translation.txt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_corpus_shape() {
        let cfg = SynthConfig::small();
        let s = generate(&cfg).unwrap();
        let corpus = s.corpus().unwrap();
        assert_eq!(corpus.queries.len(), 40);
        assert_eq!(corpus.targets.len(), 200);
        s.judgments.validate(&corpus).unwrap();
        s.splits.validate(&corpus).unwrap();
        for q in corpus.queries.docs() {
            let grades: Vec<u8> = s.judgments.relevant(&q.id).map(|(_, g)| g).collect();
            assert_eq!(grades.iter().filter(|&&g| g == 2).count(), 1);
            assert!(grades.len() >= 2);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::small();
        assert_eq!(generate(&cfg).unwrap().records, generate(&cfg).unwrap().records);
    }

    #[test]
    fn text_signal_shares_topic_tokens() {
        let cfg = SynthConfig {
            signal: SignalMode::Split {
                text_fraction: 1.0,
                category_with_text: 0.0,
            },
            ..SynthConfig::small()
        };
        let s = generate(&cfg).unwrap();
        let corpus = s.corpus().unwrap();
        for (q, d, _) in s.judgments.iter() {
            let qd = corpus.queries.get(q).unwrap();
            let dd = corpus.targets.get(d).unwrap();
            let topic = qd.tokens.iter().find(|t| t.starts_with("tp")).unwrap();
            let prefix = &topic[..topic.find('x').unwrap() + 1];
            assert!(dd.tokens.iter().any(|t| t.starts_with(prefix)));
        }
    }
}
