//! Stacked models: a convex combination of a text-only and a meta-only
//! model's scores.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Judgments};
use crate::error::{Error, Result};
use crate::eval::{ndcg, sort_run, Gain};
use crate::ranker::{Mode, RankModel};
use crate::retrieval::{grid_search, linear_sweep, GridResult};
use crate::util;

/// `alpha * s_text + (1 - alpha) * s_meta`
pub fn combine(alpha: f64, s_text: f64, s_meta: f64) -> f64 {
    alpha * s_text + (1.0 - alpha) * s_meta
}

#[derive(Debug, Clone)]
pub struct StackedModel {
    pub text_model: Arc<RankModel>,
    pub meta_model: Arc<RankModel>,
    pub alpha: f64,
}

impl StackedModel {
    pub fn new(text_model: Arc<RankModel>, meta_model: Arc<RankModel>, alpha: f64) -> Result<Self> {
        if text_model.mode() != Mode::TextOnly || meta_model.mode() != Mode::MetaOnly {
            return Err(Error::Config(format!(
                "stacking needs a text_only and a meta_only model, got {} and {}",
                text_model.mode(),
                meta_model.mode()
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(StackedModel {
            text_model,
            meta_model,
            alpha,
        })
    }

    pub fn score(&self, query: &Document, doc: &Document) -> Result<f64> {
        Ok(combine(self.alpha, self.text_model.score(query, doc)?, self.meta_model.score(query, doc)?))
    }

    /// Candidates by descending stacked score, ties by id.
    pub fn rank(&self, query: &Document, candidates: &[&Document]) -> Result<Vec<(String, f64)>> {
        let scores = ComponentScores::compute(&self.text_model, &self.meta_model, query, candidates)?;
        Ok(scores.ranking(self.alpha))
    }
}

/// Both component scores for every candidate of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentScores {
    pub query_id: String,
    /// `(doc_id, text score, meta score)`
    pub docs: Vec<(String, f64, f64)>,
}

impl ComponentScores {
    pub fn compute(text: &RankModel, meta: &RankModel, query: &Document, candidates: &[&Document]) -> Result<Self> {
        let t = text.rank(query, candidates)?;
        let m: std::collections::HashMap<String, f64> = meta.rank(query, candidates)?.into_iter().collect();
        Ok(ComponentScores {
            query_id: query.id.clone(),
            docs: t.into_iter().map(|(d, s)| {
                let sm = m[&d];
                (d, s, sm)
            })
            .collect(),
        })
    }

    pub fn ranking(&self, alpha: f64) -> Vec<(String, f64)> {
        let mut r: Vec<(String, f64)> = self.docs.iter().map(|(d, t, m)| (d.clone(), combine(alpha, *t, *m))).collect();
        sort_run(&mut r);
        r
    }
}

/// Mean NDCG of the stacked ranking at `alpha` over queries with a relevant
/// document.
pub fn stacked_ndcg(dev: &[ComponentScores], judgments: &Judgments, alpha: f64, gain: Gain) -> Result<f64> {
    let mut values = Vec::new();
    for q in dev {
        let Some(grades) = judgments.for_query(&q.query_id) else { continue };
        let ranking = q.ranking(alpha);
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

/// Grid search of `alpha` on dev; ties go to the smaller alpha.
pub fn grid_search_alpha(dev: &[ComponentScores], judgments: &Judgments, step: f64, gain: Gain) -> Result<GridResult> {
    if dev.is_empty() {
        return Err(Error::Data("empty dev set".into()));
    }
    grid_search(&linear_sweep(step)?, |a| stacked_ndcg(dev, judgments, a, gain))
}

/// Stacked model on disk: the two component model files and the weight.
/// The pipeline stores the model paths relative to its output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedManifest {
    pub text_model: PathBuf,
    pub meta_model: PathBuf,
    pub alpha: f64,
    pub config_hash: String,
}

impl StackedManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        util::write_file(path, format!("{json}\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}
