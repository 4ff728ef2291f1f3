use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Judgments;
use crate::error::{Error, Result};
use crate::util;

/// A (query, better document, worse document) comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainingPair {
    pub query_id: String,
    pub pos_id: String,
    pub neg_id: String,
    pub pos_grade: u8,
    pub neg_grade: u8,
}

impl TrainingPair {
    pub fn new(query_id: &str, pos: (&str, u8), neg: (&str, u8)) -> Result<Self> {
        if pos.1 <= neg.1 {
            return Err(Error::Data(format!(
                "pair ({query_id}, {}, {}): positive grade {} must exceed negative grade {}",
                pos.0, neg.0, pos.1, neg.1
            )));
        }
        if pos.0 == neg.0 {
            return Err(Error::Data(format!("pair for {query_id} compares {} with itself", pos.0)));
        }
        Ok(TrainingPair {
            query_id: query_id.to_string(),
            pos_id: pos.0.to_string(),
            neg_id: neg.0.to_string(),
            pos_grade: pos.1,
            neg_grade: neg.1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub negatives_per_positive: usize,
    pub include_graded_pairs: bool,
    /// Fraction of the graded (higher, lower >= 1) comparisons kept per query.
    pub graded_pair_sample: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            negatives_per_positive: 4,
            include_graded_pairs: true,
            graded_pair_sample: 0.5,
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.negatives_per_positive < 1 {
            return Err(Error::Config("negatives_per_positive must be at least 1".into()));
        }
        if !(self.graded_pair_sample > 0.0 && self.graded_pair_sample <= 1.0) {
            return Err(Error::Config("graded_pair_sample must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSample {
    pub pairs: Vec<TrainingPair>,
    /// Queries dropped because no grade-0 document was available.
    pub skipped_queries: usize,
}

/// Samples pairwise training comparisons.
///
/// Every judged document with grade >= 1 is paired with
/// `negatives_per_positive` distinct grade-0 documents drawn uniformly from
/// `pool` (documents in `pool` without a judgment count as grade 0). With
/// `include_graded_pairs`, a `graded_pair_sample` fraction (rounded up) of all
/// comparisons between two different positive grades is added per query.
pub fn build_training_pairs(judgments: &Judgments, pool: &[&str], cfg: &PairConfig, seed: u64) -> Result<PairSample> {
    cfg.validate()?;
    let mut pool: Vec<&str> = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PairSample::default();
    for qid in judgments.query_ids() {
        let positives: Vec<(&str, u8)> = judgments.relevant(qid).collect();
        if positives.is_empty() {
            continue;
        }
        let negatives: Vec<&str> = pool.iter().copied().filter(|d| judgments.grade(qid, d) == 0).collect();
        if negatives.is_empty() {
            log::warn!("query {qid}: no grade-0 documents in the pool, skipped");
            out.skipped_queries += 1;
            continue;
        }
        let take = cfg.negatives_per_positive.min(negatives.len());
        for &(pos, grade) in &positives {
            let mut picked = sample(&mut rng, negatives.len(), take).into_vec();
            picked.sort_unstable();
            for i in picked {
                out.pairs.push(TrainingPair::new(qid, (pos, grade), (negatives[i], 0))?);
            }
        }
        if cfg.include_graded_pairs {
            let mut graded = Vec::new();
            for &(hi, hg) in &positives {
                for &(lo, lg) in &positives {
                    if hg > lg {
                        graded.push(((hi, hg), (lo, lg)));
                    }
                }
            }
            if !graded.is_empty() {
                let keep = ((cfg.graded_pair_sample * graded.len() as f64).ceil() as usize).clamp(1, graded.len());
                let mut picked = sample(&mut rng, graded.len(), keep).into_vec();
                picked.sort_unstable();
                for i in picked {
                    let (pos, neg) = graded[i];
                    out.pairs.push(TrainingPair::new(qid, pos, neg)?);
                }
            }
        }
    }
    Ok(out)
}

/// Tab-separated `query pos neg pos_grade neg_grade`, preceded by a `#` header.
pub fn save_pairs(path: &Path, pairs: &[TrainingPair], header: &str) -> Result<()> {
    let mut w = util::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# {header}").map_err(io)?;
    for p in pairs {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", p.query_id, p.pos_id, p.neg_id, p.pos_grade, p.neg_grade).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    let loc = path.display().to_string();
    let mut pairs = Vec::new();
    for (line_no, line) in util::open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(&loc, line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let grade = |s: &str| s.parse::<u8>().map_err(|_| Error::parse(&loc, line_no, format!("bad grade {s:?}")));
        let pair = TrainingPair::new(f[0], (f[1], grade(f[3])?), (f[2], grade(f[4])?))
            .map_err(|e| Error::parse(&loc, line_no, e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn judgments(entries: &[(&str, &str, u8)]) -> Judgments {
        let mut j = Judgments::new();
        for (q, d, g) in entries {
            j.insert(q, d, *g).unwrap();
        }
        j
    }

    #[test]
    fn four_negatives_per_positive() {
        let j = judgments(&[("q", "rel", 2)]);
        let pool: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
        let mut refs: Vec<&str> = pool.iter().map(String::as_str).collect();
        refs.push("rel");
        let cfg = PairConfig { negatives_per_positive: 4, ..Default::default() };
        let out = build_training_pairs(&j, &refs, &cfg, 7).unwrap();
        assert_eq!(out.pairs.len(), 4);
        assert!(out.pairs.iter().all(|p| p.pos_grade == 2 && p.neg_grade == 0 && p.pos_id == "rel"));
        let negs: HashSet<&str> = out.pairs.iter().map(|p| p.neg_id.as_str()).collect();
        assert_eq!(negs.len(), 4);
    }

    #[test]
    fn no_positives_gives_nothing() {
        let j = judgments(&[("q", "a", 0)]);
        let cfg = PairConfig { include_graded_pairs: false, ..Default::default() };
        let out = build_training_pairs(&j, &["a", "b"], &cfg, 1).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.skipped_queries, 0);
    }

    #[test]
    fn graded_pairs_enumerated() {
        let j = judgments(&[("q", "A", 2), ("q", "B", 1)]);
        let cfg = PairConfig {
            negatives_per_positive: 1,
            include_graded_pairs: true,
            graded_pair_sample: 1.0,
        };
        let out = build_training_pairs(&j, &["A", "B", "C"], &cfg, 3).unwrap();
        let got: HashSet<(&str, &str)> = out.pairs.iter().map(|p| (p.pos_id.as_str(), p.neg_id.as_str())).collect();
        let want: HashSet<(&str, &str)> = [("A", "C"), ("B", "C"), ("A", "B")].into();
        assert_eq!(got, want);
    }

    #[test]
    fn patent_grades_produce_all_lower_comparisons() {
        let j = judgments(&[("q", "F", 3), ("q", "S", 2), ("q", "A", 1)]);
        let cfg = PairConfig {
            negatives_per_positive: 1,
            include_graded_pairs: true,
            graded_pair_sample: 1.0,
        };
        let out = build_training_pairs(&j, &["F", "S", "A", "N"], &cfg, 3).unwrap();
        let graded: HashSet<(&str, &str)> = out
            .pairs
            .iter()
            .filter(|p| p.neg_grade > 0)
            .map(|p| (p.pos_id.as_str(), p.neg_id.as_str()))
            .collect();
        assert_eq!(graded, [("F", "S"), ("F", "A"), ("S", "A")].into());
    }

    #[test]
    fn query_without_negatives_is_skipped() {
        let j = judgments(&[("q", "a", 1), ("q2", "b", 1)]);
        let out = build_training_pairs(&j, &["a", "b"], &PairConfig::default(), 0).unwrap();
        // q has only "b" as a negative; q2 has only "a".
        assert_eq!(out.skipped_queries, 0);
        let out = build_training_pairs(&j, &["a"], &PairConfig::default(), 0).unwrap();
        assert_eq!(out.skipped_queries, 1);
    }

    #[test]
    fn same_seed_same_pairs() {
        let mut entries = Vec::new();
        let names: Vec<String> = (0..40).map(|i| format!("d{i}")).collect();
        for q in 0..5 {
            entries.push((format!("q{q}"), names[q].clone(), 2u8));
            entries.push((format!("q{q}"), names[q + 10].clone(), 1u8));
        }
        let mut j = Judgments::new();
        for (q, d, g) in &entries {
            j.insert(q, d, *g).unwrap();
        }
        let pool: Vec<&str> = names.iter().map(String::as_str).collect();
        let a = build_training_pairs(&j, &pool, &PairConfig::default(), 11).unwrap();
        let b = build_training_pairs(&j, &pool, &PairConfig::default(), 11).unwrap();
        assert_eq!(a, b);
        let c = build_training_pairs(&j, &pool, &PairConfig::default(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_inverted_pairs() {
        assert!(TrainingPair::new("q", ("a", 1), ("b", 1)).is_err());
        assert!(TrainingPair::new("q", ("a", 2), ("a", 0)).is_err());
    }

    #[test]
    fn pairs_file_roundtrip() {
        let pairs = vec![TrainingPair::new("q", ("a", 2), ("b", 0)).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        save_pairs(&p, &pairs, "config abc").unwrap();
        assert_eq!(load_pairs(&p).unwrap(), pairs);
    }
}
