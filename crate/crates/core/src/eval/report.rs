use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Judgments;
use crate::error::{Error, Result};
use crate::eval::{ndcg, randomization_test, Gain, RunList};

/// Per-query NDCG of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub per_query: BTreeMap<String, f64>,
    /// Queries in the run without any relevant judged document.
    pub excluded: Vec<String>,
    pub mean: f64,
}

/// Scores every query of `run`; queries with no relevant document are
/// excluded from the mean.
pub fn evaluate_run(run: &RunList, judgments: &Judgments, gain: Gain) -> Result<RunEvaluation> {
    let empty = BTreeMap::new();
    let mut out = RunEvaluation::default();
    for (q, ranking) in run.iter() {
        let ids: Vec<&str> = ranking.iter().map(|(d, _)| d.as_str()).collect();
        match ndcg(&ids, judgments.for_query(q).unwrap_or(&empty), gain) {
            Some(v) => {
                out.per_query.insert(q.to_string(), v);
            }
            None => out.excluded.push(q.to_string()),
        }
    }
    if out.per_query.is_empty() {
        return Err(Error::Data("no query in the run has a relevant document".into()));
    }
    out.mean = out.per_query.values().sum::<f64>() / out.per_query.len() as f64;
    Ok(out)
}

/// A run labelled with the model that produced it, the number of
/// irrelevant candidates it ranked and the training seed.
#[derive(Debug, Clone)]
pub struct LabelledRun {
    pub model: String,
    pub size: usize,
    pub seed: u64,
    pub run: RunList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub gain: Gain,
    /// Model that every other model is tested against.
    pub baseline: Option<String>,
    pub iterations: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            gain: Gain::Exponential,
            baseline: None,
            iterations: 100_000,
            seed: 1,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub size: usize,
    pub seed: u64,
    pub queries: usize,
    pub excluded: usize,
    pub ndcg: f64,
    /// Against the baseline run with the same size and seed.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub header: String,
    pub options: ReportOptions,
    pub rows: Vec<ReportRow>,
}

/// Evaluates labelled runs and tests every non-baseline run against the
/// baseline run with the same size and seed.
pub fn experiment_report(runs: &[LabelledRun], judgments: &Judgments, opts: &ReportOptions, header: &str) -> Result<ExperimentReport> {
    let mut evals = BTreeMap::new();
    for r in runs {
        let key = (r.model.clone(), r.size, r.seed);
        if evals.insert(key, evaluate_run(&r.run, judgments, opts.gain)?).is_some() {
            return Err(Error::Data(format!("two runs for model {} size {} seed {}", r.model, r.size, r.seed)));
        }
    }
    let mut rows = Vec::new();
    for ((model, size, seed), ev) in &evals {
        let mut p_value = None;
        if let Some(base) = opts.baseline.as_ref().filter(|b| *b != model) {
            if let Some(bev) = evals.get(&(base.clone(), *size, *seed)) {
                let qa: BTreeSet<&String> = ev.per_query.keys().collect();
                let qb: BTreeSet<&String> = bev.per_query.keys().collect();
                if qa != qb {
                    return Err(Error::Data(format!(
                        "{model} and {base} (size {size}, seed {seed}) were evaluated on different queries"
                    )));
                }
                let a: Vec<f64> = ev.per_query.values().copied().collect();
                let b: Vec<f64> = bev.per_query.values().copied().collect();
                p_value = Some(randomization_test(&a, &b, opts.iterations, opts.seed)?);
            }
        }
        rows.push(ReportRow {
            model: model.clone(),
            size: *size,
            seed: *seed,
            queries: ev.per_query.len(),
            excluded: ev.excluded.len(),
            ndcg: ev.mean,
            p_value,
        });
    }
    Ok(ExperimentReport {
        header: header.to_string(),
        options: opts.clone(),
        rows,
    })
}

impl ExperimentReport {
    /// Mean NDCG over seeds per (model, size), and whether every seed was
    /// significant against the baseline.
    pub fn summary(&self) -> BTreeMap<(String, usize), (f64, bool)> {
        let mut acc: BTreeMap<(String, usize), (f64, usize, bool, bool)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry((r.model.clone(), r.size)).or_insert((0.0, 0, true, false));
            e.0 += r.ndcg;
            e.1 += 1;
            match r.p_value {
                Some(p) => {
                    e.3 = true;
                    e.2 &= p < self.options.alpha;
                }
                None => e.2 = false,
            }
        }
        acc.into_iter().map(|(k, (s, n, sig, tested))| (k, (s / n as f64, sig && tested))).collect()
    }

    /// Aligned plain-text rendering: a per-run table and a model-by-size
    /// summary where `†` marks significance on every seed.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {}", self.header).unwrap();
        writeln!(
            out,
            "# gain={} iterations={} alpha={} baseline={}",
            match self.options.gain {
                Gain::Exponential => "exponential",
                Gain::Linear => "linear",
            },
            self.options.iterations,
            self.options.alpha,
            self.options.baseline.as_deref().unwrap_or("-")
        )
        .unwrap();
        writeln!(out).unwrap();
        writeln!(out, "{:<18} {:>6} {:>6} {:>8} {:>8} {:>8} {:>10}", "model", "size", "seed", "queries", "excluded", "ndcg", "p").unwrap();
        for r in &self.rows {
            let p = r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.6}"));
            writeln!(
                out,
                "{:<18} {:>6} {:>6} {:>8} {:>8} {:>8.4} {:>10}",
                r.model, r.size, r.seed, r.queries, r.excluded, r.ndcg, p
            )
            .unwrap();
        }
        let summary = self.summary();
        let sizes: BTreeSet<usize> = summary.keys().map(|(_, s)| *s).collect();
        let models: BTreeSet<&String> = summary.keys().map(|(m, _)| m).collect();
        writeln!(out).unwrap();
        write!(out, "{:<18}", "mean ndcg").unwrap();
        for s in &sizes {
            write!(out, " {s:>9}").unwrap();
        }
        writeln!(out).unwrap();
        for m in models {
            write!(out, "{m:<18}").unwrap();
            for s in &sizes {
                match summary.get(&(m.clone(), *s)) {
                    Some((v, sig)) => write!(out, " {:>8.4}{}", v, if *sig { "†" } else { " " }).unwrap(),
                    None => write!(out, " {:>9}", "-").unwrap(),
                }
            }
            writeln!(out).unwrap();
        }
        out
    }

    /// Tab-separated per-run rows with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tsize\tseed\tqueries\texcluded\tndcg\tp_value\n");
        for r in &self.rows {
            let p = r.p_value.map_or_else(String::new, |p| p.to_string());
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", r.model, r.size, r.seed, r.queries, r.excluded, r.ndcg, p).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judgments() -> Judgments {
        let mut j = Judgments::new();
        j.insert("q1", "a", 2).unwrap();
        j.insert("q2", "b", 1).unwrap();
        j
    }

    fn run(q1: &[&str], q2: &[&str]) -> RunList {
        let mut r = RunList::new();
        for (q, docs) in [("q1", q1), ("q2", q2)] {
            let n = docs.len() as f64;
            r.insert(q, docs.iter().enumerate().map(|(i, d)| (d.to_string(), n - i as f64)).collect()).unwrap();
        }
        r
    }

    #[test]
    fn means_are_hand_computed() {
        let r = run(&["a", "x"], &["x", "b"]);
        let ev = evaluate_run(&r, &judgments(), Gain::Exponential).unwrap();
        assert_eq!(ev.per_query["q1"], 1.0);
        assert!((ev.per_query["q2"] - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((ev.mean - (1.0 + 1.0 / 3f64.log2()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn self_comparison_has_p_one() {
        let r = run(&["a", "x"], &["x", "b"]);
        let runs = vec![
            LabelledRun { model: "base".into(), size: 40, seed: 1, run: r.clone() },
            LabelledRun { model: "other".into(), size: 40, seed: 1, run: r },
        ];
        let opts = ReportOptions { baseline: Some("base".into()), iterations: 500, ..Default::default() };
        let rep = experiment_report(&runs, &judgments(), &opts, "t").unwrap();
        let other = rep.rows.iter().find(|r| r.model == "other").unwrap();
        assert_eq!(other.p_value, Some(1.0));
        assert!(rep.to_text().contains("other"));
    }

    #[test]
    fn mismatched_queries_rejected() {
        let mut short = RunList::new();
        short.insert("q1", vec![("a".into(), 1.0)]).unwrap();
        let runs = vec![
            LabelledRun { model: "base".into(), size: 40, seed: 1, run: run(&["a"], &["b"]) },
            LabelledRun { model: "other".into(), size: 40, seed: 1, run: short },
        ];
        let opts = ReportOptions { baseline: Some("base".into()), iterations: 10, ..Default::default() };
        assert!(experiment_report(&runs, &judgments(), &opts, "t").is_err());
    }
}
