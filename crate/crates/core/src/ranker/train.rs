use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Judgments, TrainingPair};
use crate::error::{Error, Result};
use crate::eval::{self, Gain};
use crate::ranker::adam::Adam;
use crate::ranker::model::{DocFeatures, RankModel};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    /// Epochs without a dev improvement before training stops.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            dropout_rate: 0.5,
            patience: 5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 || self.patience < 1 {
            return Err(Error::Config("epochs, batch_size and patience must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("Adam needs learning_rate > 0, betas in [0, 1) and epsilon > 0".into()));
        }
        Ok(())
    }
}

/// One dev query with the candidates it is ranked against.
#[derive(Debug, Clone)]
pub struct DevQuery<'a> {
    pub query: &'a Document,
    pub candidates: Vec<&'a Document>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training hinge loss, with dropout active.
    pub mean_loss: f64,
    pub dev_ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_dev_ndcg: f64,
    pub stopped_early: bool,
}

/// Mean dev NDCG (exponential gain) of `model` over queries with at least
/// one relevant candidate.
pub fn dev_ndcg(model: &RankModel, dev: &[DevQuery<'_>], judgments: &Judgments) -> Result<f64> {
    let mut values = Vec::new();
    let queries: Vec<_> = dev.iter().map(|dq| (dq.query, dq.candidates.clone())).collect();
    for (dq, ranking) in dev.iter().zip(model.rank_many(&queries)?) {
        let Some(grades) = judgments.for_query(&dq.query.id) else { continue };
        let ids: Vec<&str> = ranking.iter().map(|(d, _)| d.as_str()).collect();
        if let Some(v) = eval::ndcg(&ids, grades, Gain::Exponential) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::Data("no dev query has a relevant candidate".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Minimises the mean pairwise hinge loss with Adam and returns the
/// parameters of the epoch with the best dev NDCG.
pub fn train(
    mut model: RankModel,
    pairs: &[TrainingPair],
    corpus: &Corpus,
    dev: &[DevQuery<'_>],
    judgments: &Judgments,
    cfg: &TrainConfig,
) -> Result<(RankModel, TrainLog)> {
    cfg.validate()?;
    model.validate()?;
    if pairs.is_empty() {
        return Err(Error::Data("no training pairs".into()));
    }
    if dev.is_empty() {
        return Err(Error::Data("empty dev set".into()));
    }

    let mut queries: HashMap<&str, DocFeatures> = HashMap::new();
    let mut targets: HashMap<&str, DocFeatures> = HashMap::new();
    for p in pairs {
        if !queries.contains_key(p.query_id.as_str()) {
            queries.insert(&p.query_id, model.featurize(corpus.queries.require(&p.query_id)?)?);
        }
        for id in [&p.pos_id, &p.neg_id] {
            if !targets.contains_key(id.as_str()) {
                targets.insert(id, model.featurize(corpus.targets.require(id)?)?);
            }
        }
    }
    let triples: Vec<(&DocFeatures, &DocFeatures, &DocFeatures)> = pairs
        .iter()
        .map(|p| (&queries[p.query_id.as_str()], &targets[p.pos_id.as_str()], &targets[p.neg_id.as_str()]))
        .collect();

    let sizes: Vec<usize> = model.parameters().iter().map(|(_, t)| t.len()).collect();
    let mut adam = Adam::new(&sizes, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut log = TrainLog::default();
    let mut best: Option<RankModel> = None;
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let dropout = (cfg.dropout_rate > 0.0).then_some(cfg.dropout_rate);

    for epoch in 1..=cfg.epochs {
        let mut rng = util::substream(cfg.seed, epoch as u64);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| triples[i]).collect();
            let batch_seed: u64 = rng.random();
            let (loss, grads) = model.batch_loss_and_gradients(&batch, dropout.map(|r| (r, batch_seed)))?;
            if !loss.is_finite() || grads.tensors().iter().any(|t| t.iter().any(|g| !g.is_finite())) {
                return Err(Error::Numerical(format!("non-finite loss or gradient in epoch {epoch}; lower the learning rate")));
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(model.parameters_mut(), grads.tensors());
        }
        let dev_ndcg = dev_ndcg(&model, dev, judgments)?;
        let mean_loss = loss_sum / triples.len() as f64;
        log::info!("epoch {epoch}: loss {mean_loss:.6} dev ndcg {dev_ndcg:.6}");
        log.epochs.push(EpochRecord { epoch, mean_loss, dev_ndcg });
        if best.is_none() || dev_ndcg > log.best_dev_ndcg {
            log.best_epoch = epoch;
            log.best_dev_ndcg = dev_ndcg;
            best = Some(model.clone());
        } else if epoch - log.best_epoch >= cfg.patience {
            log.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    Ok((best.expect("at least one epoch ran"), log))
}
