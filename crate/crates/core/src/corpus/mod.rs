//! Documents, relevance judgments and the files they live in.

mod overlap;
mod pairs;
mod tokenize;
mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

pub use overlap::{category_overlap, overlap_counts, overlap_histogram, OverlapHistogram, BUCKET_LABELS};
pub use pairs::{build_training_pairs, load_pairs, save_pairs, PairConfig, PairSample, TrainingPair};
pub use tokenize::tokenize;
pub use vocab::{build_vocab, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Query,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub side: Side,
    pub tokens: Vec<String>,
    pub meta_labels: BTreeSet<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, side: Side, tokens: Vec<String>, meta_labels: BTreeSet<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::Data(format!("document id {id:?} must be nonempty and contain no whitespace")));
        }
        if tokens.is_empty() && meta_labels.is_empty() {
            return Err(Error::Data(format!("document {id} has neither text nor meta labels")));
        }
        Ok(Document { id, side, tokens, meta_labels })
    }

    /// Tokenizes `text` and builds the document.
    pub fn from_text<I, S>(id: impl Into<String>, side: Side, text: &str, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(id, side, tokenize(text), labels.into_iter().map(Into::into).collect())
    }
}

/// Documents of one side, addressable by id.
#[derive(Debug, Clone, Default)]
pub struct Collection {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Collection {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate document id {}", d.id)));
            }
        }
        Ok(Collection { docs, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn require(&self, id: &str) -> Result<&Document> {
        self.get(id).ok_or_else(|| Error::Data(format!("unknown document id {id}")))
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Document ids in lexicographic order.
    pub fn sorted_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.docs.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        ids
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub queries: Collection,
    pub targets: Collection,
}

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    side: Side,
    text: String,
    #[serde(default)]
    meta: Vec<String>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let (queries, targets): (Vec<_>, Vec<_>) = docs.into_iter().partition(|d| d.side == Side::Query);
        Ok(Corpus {
            queries: Collection::new(queries)?,
            targets: Collection::new(targets)?,
        })
    }

    /// Reads a JSON-lines corpus: one `{"id", "side", "text", "meta"}` object per line.
    pub fn load(path: &Path) -> Result<Self> {
        let mut docs = Vec::new();
        for (line_no, line) in util::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CorpusRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path.display().to_string(), line_no, e.to_string()))?;
            let doc = Document::from_text(rec.id, rec.side, &rec.text, rec.meta)
                .map_err(|e| Error::parse(path.display().to_string(), line_no, e.to_string()))?;
            docs.push(doc);
        }
        Corpus::new(docs)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.queries.docs().iter().chain(self.targets.docs())
    }
}

/// Writes raw-text corpus records as JSON lines.
pub fn write_corpus_records<'a, I>(path: &Path, records: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, Side, &'a str, &'a [String])>,
{
    let mut w = util::create(path)?;
    for (id, side, text, meta) in records {
        let rec = CorpusRecord {
            id: id.to_string(),
            side,
            text: text.to_string(),
            meta: meta.to_vec(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Graded relevance judgments; absent pairs are grade 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    grades: BTreeMap<String, BTreeMap<String, u8>>,
}

pub const MAX_GRADE: u8 = 3;

impl Judgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u8) -> Result<()> {
        if grade > MAX_GRADE {
            return Err(Error::Data(format!("grade {grade} for ({query_id}, {doc_id}) outside 0..={MAX_GRADE}")));
        }
        self.grades
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
        Ok(())
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u8 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// All judged documents of a query (including explicit zeros).
    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, u8>> {
        self.grades.get(query_id)
    }

    /// Judged documents with grade >= 1.
    pub fn relevant(&self, query_id: &str) -> impl Iterator<Item = (&str, u8)> {
        self.grades
            .get(query_id)
            .into_iter()
            .flat_map(|m| m.iter().filter(|(_, &g)| g >= 1).map(|(d, &g)| (d.as_str(), g)))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u8)> {
        self.grades
            .iter()
            .flat_map(|(q, m)| m.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g)))
    }

    /// Checks every referenced id against the corpus.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        for (q, d, _) in self.iter() {
            if corpus.queries.get(q).is_none() {
                return Err(Error::Data(format!("judgments reference unknown query {q}")));
            }
            if corpus.targets.get(d).is_none() {
                return Err(Error::Data(format!("judgments reference unknown document {d}")));
            }
        }
        Ok(())
    }

    /// Reads qrels. Accepts `query_id doc_id grade` and the four-column TREC
    /// layout `query_id iteration doc_id grade`.
    pub fn load(path: &Path) -> Result<Self> {
        let loc = path.display().to_string();
        let mut j = Judgments::new();
        for (line_no, line) in util::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (q, d, g) = match fields.as_slice() {
                [] => continue,
                [q, d, g] | [q, _, d, g] => (*q, *d, *g),
                _ => return Err(Error::parse(&loc, line_no, format!("expected 3 or 4 fields, found {}", fields.len()))),
            };
            let grade: i64 = g
                .parse()
                .map_err(|_| Error::parse(&loc, line_no, format!("bad grade {g:?}")))?;
            if !(0..=i64::from(MAX_GRADE)).contains(&grade) {
                return Err(Error::parse(&loc, line_no, format!("grade {grade} outside 0..={MAX_GRADE}")));
            }
            j.insert(q, d, grade as u8)?;
        }
        Ok(j)
    }

    /// Writes four-column TREC qrels.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        for (q, d, g) in self.iter() {
            writeln!(w, "{q} 0 {d} {g}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Source-side label to target-side labels. Labels without an entry map to
/// themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranslationMap {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl TranslationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        self.map.entry(source.to_string()).or_default().insert(target.to_string());
    }

    pub fn translate<'a, I: IntoIterator<Item = &'a String>>(&self, labels: I) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for l in labels {
            match self.map.get(l) {
                Some(targets) => out.extend(targets.iter().cloned()),
                None => {
                    out.insert(l.clone());
                }
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map
            .iter()
            .flat_map(|(s, ts)| ts.iter().map(move |t| (s.as_str(), t.as_str())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let loc = path.display().to_string();
        let mut m = TranslationMap::new();
        for (line_no, line) in util::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [] => {}
                [s, t] => m.insert(s, t),
                _ => return Err(Error::parse(&loc, line_no, "expected `source_label target_label`")),
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        for (s, t) in self.iter() {
            writeln!(w, "{s} {t}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a `label_a label_b` edge list. Blank lines and `#` comments are skipped.
pub fn load_edge_list(path: &Path) -> Result<Vec<(String, String)>> {
    let loc = path.display().to_string();
    let mut edges = Vec::new();
    for (line_no, line) in util::open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match fields.as_slice() {
            [a, b] => edges.push((a.to_string(), b.to_string())),
            _ => return Err(Error::parse(&loc, line_no, "expected `label_a label_b`")),
        }
    }
    Ok(edges)
}

pub fn save_edge_list(path: &Path, edges: &[(String, String)]) -> Result<()> {
    let mut w = util::create(path)?;
    for (a, b) in edges {
        writeln!(w, "{a} {b}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Train/dev/test assignment of query ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    /// Reads `query_id split` lines, split being `train`, `dev` or `test`.
    pub fn load(path: &Path) -> Result<Self> {
        let loc = path.display().to_string();
        let mut s = Splits::default();
        let mut seen = BTreeSet::new();
        for (line_no, line) in util::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (q, which) = match fields.as_slice() {
                [] => continue,
                [q, w] => (*q, *w),
                _ => return Err(Error::parse(&loc, line_no, "expected `query_id split`")),
            };
            if !seen.insert(q.to_string()) {
                return Err(Error::parse(&loc, line_no, format!("query {q} assigned twice")));
            }
            match which {
                "train" => s.train.push(q.to_string()),
                "dev" => s.dev.push(q.to_string()),
                "test" => s.test.push(q.to_string()),
                _ => return Err(Error::parse(&loc, line_no, format!("unknown split {which:?}"))),
            }
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        for (name, ids) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            for q in ids {
                writeln!(w, "{q} {name}").map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Every split id must name a query of the corpus.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        for q in self.train.iter().chain(&self.dev).chain(&self.test) {
            corpus.queries.require(q)?;
        }
        Ok(())
    }
}
