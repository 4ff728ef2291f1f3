//! Experiment configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PairConfig;
use crate::error::{Error, Result};
use crate::eval::Gain;
use crate::graph_embed::WalkConfig;
use crate::ranker::{Mode, ModelSpec, TrainConfig};
use crate::skipgram::SgnsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// JSON-lines corpus of queries and target documents.
    pub corpus: PathBuf,
    pub qrels: PathBuf,
    /// `query_id split` assignment.
    pub splits: PathBuf,
    /// Category graph edge list.
    pub graph: PathBuf,
    /// Source-to-target label map, used by the overlap analysis.
    pub translation: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: "corpus.jsonl".into(),
            qrels: "qrels.txt".into(),
            splits: "splits.txt".into(),
            graph: "graph.txt".into(),
            translation: None,
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub min_count: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { min_count: 2 }
    }
}

/// Random walks plus skip-gram settings for the category graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryConfig {
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub subsample_threshold: f64,
    pub max_norm: f64,
    pub seed: u64,
}

impl Default for CategoryConfig {
    fn default() -> Self {
        let walks = WalkConfig::default();
        CategoryConfig {
            walk_length: walks.walk_length,
            walks_per_node: walks.walks_per_node,
            dim: 30,
            window: 5,
            negatives: 5,
            epochs: 20,
            initial_lr: 0.025,
            subsample_threshold: 0.0,
            max_norm: 100.0,
            seed: 1,
        }
    }
}

impl CategoryConfig {
    pub fn walks(&self) -> WalkConfig {
        WalkConfig {
            walk_length: self.walk_length,
            walks_per_node: self.walks_per_node,
            seed: self.seed,
        }
    }

    pub fn sgns(&self) -> SgnsConfig {
        SgnsConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            initial_lr: self.initial_lr,
            subsample_threshold: self.subsample_threshold,
            max_norm: self.max_norm,
            seed: self.seed,
        }
    }
}

/// How test rankings are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Joint,
    TextOnly,
    MetaOnly,
    /// Convex combination of a text-only and a meta-only model.
    Stacked,
    /// Model scores on tf-idf preselected candidates.
    Rerank,
    /// tf-idf and model scores combined on tf-idf preselected candidates.
    WeightedRerank,
    /// tf-idf combined with a tuned stacked model on tf-idf preselected
    /// candidates; needs `tune --strategy stacked` first.
    StackedWeightedRerank,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Joint => "joint",
            Strategy::TextOnly => "text_only",
            Strategy::MetaOnly => "meta_only",
            Strategy::Stacked => "stacked",
            Strategy::Rerank => "rerank",
            Strategy::WeightedRerank => "weighted_rerank",
            Strategy::StackedWeightedRerank => "stacked_weighted_rerank",
        }
    }

    /// Single-model modes this strategy trains.
    pub fn modes(self, rerank_mode: Mode) -> Vec<Mode> {
        match self {
            Strategy::Joint => vec![Mode::Joint],
            Strategy::TextOnly => vec![Mode::TextOnly],
            Strategy::MetaOnly => vec![Mode::MetaOnly],
            Strategy::Stacked | Strategy::StackedWeightedRerank => vec![Mode::TextOnly, Mode::MetaOnly],
            Strategy::Rerank | Strategy::WeightedRerank => vec![rerank_mode],
        }
    }

    /// Whether candidates come from tf-idf preselection.
    pub fn preselects(self) -> bool {
        matches!(self, Strategy::Rerank | Strategy::WeightedRerank | Strategy::StackedWeightedRerank)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Strategy::Joint,
            Strategy::TextOnly,
            Strategy::MetaOnly,
            Strategy::Stacked,
            Strategy::Rerank,
            Strategy::WeightedRerank,
            Strategy::StackedWeightedRerank,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub strategy: Strategy,
    /// Model used by the rerank strategies.
    pub rerank_mode: Mode,
    /// One training run per seed.
    pub seeds: Vec<u64>,
    /// Irrelevant documents per test query.
    pub candidate_sizes: Vec<usize>,
    /// Irrelevant documents per dev query.
    pub dev_candidates: usize,
    /// Seed of the test candidate draw, shared by all runs so that runs
    /// with the same size rank the same documents.
    pub candidate_seed: u64,
    pub grid_step: f64,
    pub gain: Gain,
    pub baseline: String,
    pub significance_iterations: usize,
    pub significance_seed: u64,
    pub alpha: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            strategy: Strategy::Joint,
            rerank_mode: Mode::Joint,
            seeds: vec![1, 2, 3],
            candidate_sizes: vec![40, 200, 400, 1000],
            dev_candidates: 40,
            candidate_seed: 7,
            grid_step: 0.05,
            gain: Gain::Exponential,
            baseline: "text_only".into(),
            significance_iterations: 100_000,
            significance_seed: 1,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    pub corpus: CorpusConfig,
    pub pairs: PairConfig,
    pub words: SgnsConfig,
    pub categories: CategoryConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub experiment: ExperimentSection,
    /// Hash of the file as written (before path resolution), so that the
    /// same configuration hashes identically wherever it is stored.
    #[serde(skip)]
    source_hash: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            paths: PathsConfig::default(),
            corpus: CorpusConfig::default(),
            pairs: PairConfig::default(),
            words: SgnsConfig::default(),
            categories: CategoryConfig::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            experiment: ExperimentSection::default(),
            source_hash: None,
        }
    }
}

fn toml_value(raw: &str) -> toml::Value {
    // Bare words that are not TOML literals are taken as strings.
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, applies `section.key=value` overrides and resolves
    /// relative paths against the file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg = cfg.with_overrides(overrides)?;
        cfg.source_hash = Some(cfg.hash()?);
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let path: Vec<&str> = key.trim().split('.').collect();
            let (last, parents) = path.split_last().unwrap();
            let mut node = &mut table;
            for p in parents {
                node = node
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("override {key}: {p} is not a section")))?;
            }
            node.insert(last.to_string(), toml_value(raw.trim()));
        }
        table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [&mut p.corpus, &mut p.qrels, &mut p.splits, &mut p.graph, &mut p.output]
            .into_iter()
            .chain(p.translation.as_mut())
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pairs.validate()?;
        self.words.validate()?;
        self.categories.walks().validate()?;
        self.categories.sgns().validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(Error::Config("experiment.seeds is empty".into()));
        }
        if e.candidate_sizes.is_empty() || e.candidate_sizes.contains(&0) || e.dev_candidates == 0 {
            return Err(Error::Config("candidate sizes must be positive".into()));
        }
        if !(e.alpha > 0.0 && e.alpha < 1.0) || e.significance_iterations == 0 {
            return Err(Error::Config("alpha must lie in (0, 1) and significance_iterations be positive".into()));
        }
        crate::retrieval::linear_sweep(e.grid_step)?;
        Ok(())
    }

    /// Fails with the first input file that does not exist.
    pub fn require_inputs(&self) -> Result<()> {
        let p = &self.paths;
        for (name, path) in [("corpus", &p.corpus), ("qrels", &p.qrels), ("splits", &p.splits), ("graph", &p.graph)]
            .into_iter()
            .chain(p.translation.as_ref().map(|t| ("translation", t)))
        {
            if !path.exists() {
                return Err(Error::Config(format!("paths.{name}: {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        if let Some(h) = &self.source_hash {
            return Ok(h.clone());
        }
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }
}
