use std::fmt;

use crate::corpus::{Document, TranslationMap};
use crate::error::{Error, Result};

/// `(shared, total)`: translated query labels found among the document's
/// labels, and the document's label count.
pub fn overlap_counts(query: &Document, doc: &Document, tmap: &TranslationMap) -> Result<(usize, usize)> {
    if doc.meta_labels.is_empty() {
        return Err(Error::Data(format!("document {} has no meta labels; overlap undefined", doc.id)));
    }
    let translated = tmap.translate(&query.meta_labels);
    let shared = doc.meta_labels.iter().filter(|l| translated.contains(*l)).count();
    Ok((shared, doc.meta_labels.len()))
}

/// Fraction of the document's labels shared with the translated query labels.
pub fn category_overlap(query: &Document, doc: &Document, tmap: &TranslationMap) -> Result<f64> {
    let (shared, total) = overlap_counts(query, doc, tmap)?;
    Ok(shared as f64 / total as f64)
}

pub const BUCKET_LABELS: [&str; 11] = [
    "0", "(0,10]", "(10,20]", "(20,30]", "(30,40]", "(40,50]", "(50,60]", "(60,70]", "(70,80]", "(80,90]", "(90,100]",
];

/// Overlap distribution: an exact-zero bucket followed by ten 10% buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapHistogram {
    pub counts: [usize; 11],
    pub percentages: [f64; 11],
    pub total: usize,
}

impl OverlapHistogram {
    fn from_counts(counts: [usize; 11]) -> Self {
        let total: usize = counts.iter().sum();
        let mut percentages = [0.0; 11];
        if total > 0 {
            for (p, &c) in percentages.iter_mut().zip(&counts) {
                *p = 100.0 * c as f64 / total as f64;
            }
        }
        OverlapHistogram { counts, percentages, total }
    }
}

/// Bucket index of `shared / total` without going through floating point.
pub(crate) fn bucket(shared: usize, total: usize) -> usize {
    if shared == 0 {
        0
    } else {
        (10 * shared).div_ceil(total).clamp(1, 10)
    }
}

/// Histogram of category overlap over relevant (grade >= 1) pairs.
pub fn overlap_histogram(pairs: &[(&Document, &Document, u8)], tmap: &TranslationMap) -> Result<OverlapHistogram> {
    let mut counts = [0usize; 11];
    for (q, d, grade) in pairs {
        if *grade < 1 {
            return Err(Error::Data(format!("overlap histogram takes relevant pairs only; ({}, {}) has grade 0", q.id, d.id)));
        }
        let (shared, total) = overlap_counts(q, d, tmap)?;
        counts[bucket(shared, total)] += 1;
    }
    Ok(OverlapHistogram::from_counts(counts))
}

impl fmt::Display for OverlapHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8} {:>8}", "overlap%", "pairs", "percent")?;
        for ((label, c), p) in BUCKET_LABELS.iter().zip(&self.counts).zip(&self.percentages) {
            writeln!(f, "{label:<10} {c:>8} {p:>8.2}")?;
        }
        write!(f, "{:<10} {:>8}", "total", self.total)
    }
}
