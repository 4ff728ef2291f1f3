use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::util;

/// Bijective token/index mapping with occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Keeps tokens with `count >= min_count`, ordered by descending count
    /// and then lexicographically.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::Data(format!("no token occurs at least {min_count} times; vocabulary is empty")));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (tokens, counts) = kept.into_iter().unzip();
        Self::from_parts(tokens, counts)
    }

    /// Builds a vocabulary in the given order. Fails on duplicates.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if tokens.len() != counts.len() {
            return Err(Error::Shape(format!("{} tokens but {} counts", tokens.len(), counts.len())));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Vocabulary { index, tokens, counts })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Maps tokens to indices, dropping out-of-vocabulary ones.
    pub fn encode<'a, I: IntoIterator<Item = &'a String>>(&self, tokens: I) -> Vec<usize> {
        tokens.into_iter().filter_map(|t| self.get(t)).collect()
    }

    /// Tab-separated `token count` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{t}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (line_no, line) in util::open_lines(path)? {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path.display().to_string(), line_no, "expected `token<TAB>count`"))?;
            let count = count
                .parse()
                .map_err(|_| Error::parse(path.display().to_string(), line_no, format!("bad count {count:?}")))?;
            tokens.push(tok.to_string());
            counts.push(count);
        }
        Self::from_parts(tokens, counts)
    }
}

/// Counts tokens over `docs` and keeps those with `count >= min_count`.
pub fn build_vocab<'a, I>(docs: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        for t in &doc.tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    Vocabulary::from_counts(counts, min_count)
}
