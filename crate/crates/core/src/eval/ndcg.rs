use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Gain of a relevance grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    /// `2^r - 1`
    #[default]
    Exponential,
    /// `r`, as trec_eval computes it.
    Linear,
}

impl Gain {
    pub fn of(self, grade: u8) -> f64 {
        match self {
            Gain::Exponential => (1u64 << grade) as f64 - 1.0,
            Gain::Linear => f64::from(grade),
        }
    }
}

impl std::str::FromStr for Gain {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "exponential" => Ok(Gain::Exponential),
            "linear" => Ok(Gain::Linear),
            _ => Err(crate::Error::Config(format!("unknown gain {s:?} (expected exponential or linear)"))),
        }
    }
}

/// `sum_i gain(r_i) / log2(i + 1)` over 1-based ranks.
pub fn dcg<I: IntoIterator<Item = u8>>(grades: I, gain: Gain) -> f64 {
    grades
        .into_iter()
        .enumerate()
        .map(|(i, r)| gain.of(r) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG without cutoff. The ideal DCG is taken over every judged document
/// of the query; unjudged documents in `ranking` have grade 0. `None` when
/// the query has no relevant document.
pub fn ndcg<S: AsRef<str>>(ranking: &[S], grades: &BTreeMap<String, u8>, gain: Gain) -> Option<f64> {
    let mut ideal: Vec<u8> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal, gain);
    if idcg == 0.0 {
        return None;
    }
    let actual = dcg(ranking.iter().map(|d| grades.get(d.as_ref()).copied().unwrap_or(0)), gain);
    Some(actual / idcg)
}
