use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::util;

/// Descending score, ties by ascending document id.
pub fn sort_run(entries: &mut [(String, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Ranked documents per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunList {
    queries: BTreeMap<String, Vec<(String, f64)>>,
}

impl RunList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one query's ranking, sorting it into run order.
    pub fn insert(&mut self, query_id: &str, mut ranking: Vec<(String, f64)>) -> Result<()> {
        if let Some((_, s)) = ranking.iter().find(|(_, s)| s.is_nan()) {
            return Err(Error::Numerical(format!("query {query_id}: score {s} in run")));
        }
        sort_run(&mut ranking);
        let mut ids: Vec<&str> = ranking.iter().map(|(d, _)| d.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("query {query_id}: document {} ranked twice", w[0])));
        }
        if self.queries.insert(query_id.to_string(), ranking).is_some() {
            return Err(Error::Data(format!("query {query_id} appears twice in run")));
        }
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&[(String, f64)]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.queries.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Six-column TREC lines `qid Q0 docid rank score tag`.
pub fn format_run(run: &RunList, tag: &str) -> Result<String> {
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(Error::Data(format!("run tag {tag:?} must be one nonempty token")));
    }
    let mut out = String::new();
    for (q, ranking) in run.iter() {
        for (rank, (d, s)) in ranking.iter().enumerate() {
            writeln!(out, "{q} Q0 {d} {} {s} {tag}", rank + 1).unwrap();
        }
    }
    Ok(out)
}

pub fn write_run(path: &Path, run: &RunList, tag: &str) -> Result<()> {
    util::write_file(path, format_run(run, tag)?.as_bytes())
}

/// Parses TREC run text; returns the run and its tag.
pub fn parse_run(text: &str, location: &str) -> Result<(RunList, String)> {
    let mut by_query: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut tag: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(Error::parse(location, line_no, format!("expected 6 columns, found {}", f.len())));
        }
        f[3].parse::<i64>()
            .map_err(|_| Error::parse(location, line_no, format!("rank {:?} is not an integer", f[3])))?;
        let score: f64 = f[4]
            .parse()
            .map_err(|_| Error::parse(location, line_no, format!("score {:?} is not a number", f[4])))?;
        match &tag {
            None => tag = Some(f[5].to_string()),
            Some(t) if t != f[5] => {
                return Err(Error::parse(location, line_no, format!("run tag {:?} differs from {t:?}", f[5])));
            }
            Some(_) => {}
        }
        by_query.entry(f[0].to_string()).or_default().push((f[2].to_string(), score));
    }
    let mut run = RunList::new();
    for (q, ranking) in by_query {
        run.insert(&q, ranking).map_err(|e| Error::parse(location, 0, e.to_string()))?;
    }
    Ok((run, tag.unwrap_or_default()))
}

pub fn read_run(path: &Path) -> Result<(RunList, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&text, &path.display().to_string())
}

/// Structured run tag `model-nSIZE-sSEED-HASH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTag {
    pub model: String,
    pub size: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl std::fmt::Display for RunTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-n{}-s{}-{}", self.model, self.size, self.seed, self.config_hash)
    }
}

impl std::str::FromStr for RunTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("run tag {s:?} is not of the form model-nSIZE-sSEED-HASH"));
        let mut parts = s.rsplitn(4, '-');
        let config_hash = parts.next().ok_or_else(bad)?.to_string();
        let seed = parts.next().and_then(|p| p.strip_prefix('s')).and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let size = parts.next().and_then(|p| p.strip_prefix('n')).and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let model = parts.next().filter(|m| !m.is_empty()).ok_or_else(bad)?.to_string();
        Ok(RunTag { model, size, seed, config_hash })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunList {
        let mut r = RunList::new();
        r.insert("q1", vec![("a".into(), 0.3), ("b".into(), 0.7)]).unwrap();
        r.insert("q2", vec![("c".into(), -0.1), ("a".into(), -0.1)]).unwrap();
        r
    }

    #[test]
    fn ordering_rules() {
        let r = sample();
        let ids: Vec<&str> = r.get("q1").unwrap().iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        let ids: Vec<&str> = r.get("q2").unwrap().iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
    }

    #[test]
    fn emit_parse_roundtrip() {
        let r = sample();
        let text = format_run(&r, "tag").unwrap();
        let (back, tag) = parse_run(&text, "mem").unwrap();
        assert_eq!(back, r);
        assert_eq!(tag, "tag");
    }

    #[test]
    fn five_columns_rejected_with_line() {
        let text = "q1 Q0 a 1 0.5 t\nq1 Q0 b 2 0.4\n";
        match parse_run(text, "run") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_doc_rejected() {
        let mut r = RunList::new();
        assert!(r.insert("q", vec![("a".into(), 1.0), ("a".into(), 0.5)]).is_err());
    }

    #[test]
    fn tag_roundtrip() {
        let t = RunTag {
            model: "weighted_rerank".into(),
            size: 40,
            seed: 3,
            config_hash: "0123abcd".into(),
        };
        assert_eq!(t.to_string().parse::<RunTag>().unwrap(), t);
        assert!("plain".parse::<RunTag>().is_err());
    }
}
