//! Experiment stages, both in memory and as the file-producing commands of
//! the `catrank` binary.
//!
//! Every command reads the configuration, the input files and the artifacts
//! of earlier commands under `paths.output`, and records what it wrote in
//! `manifest.json` together with the configuration hash.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Strategy};
use crate::corpus::{
    build_training_pairs, build_vocab, load_edge_list, load_pairs, overlap_histogram, save_pairs, Corpus, Document, Judgments,
    OverlapHistogram, PairSample, Side, Splits, TranslationMap, TrainingPair, Vocabulary, BUCKET_LABELS,
};
use crate::ensemble::{grid_search_alpha, ComponentScores, StackedManifest, StackedModel};
use crate::error::{Error, Result};
use crate::eval::{experiment_report, read_run, write_run, ExperimentReport, LabelledRun, ReportOptions, RunList, RunTag};
use crate::graph_embed::{train_category_embeddings, CategoryGraph};
use crate::ranker::{load_model, save_model, train, DevQuery, Mode, ModelMetadata, RankModel, TrainLog};
use crate::retrieval::{grid_search_lambda, preselect, sample_candidates, weighted_rerank, CandidateSet, GridResult, InvertedIndex, RerankDev};
use crate::skipgram::{load_embeddings, save_embeddings, train_sgns, EmbeddingMatrix};
use crate::util;

/// Everything the experiment reads.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub judgments: Judgments,
    pub splits: Splits,
    pub edges: Vec<(String, String)>,
    pub translation: TranslationMap,
}

impl Inputs {
    pub fn new(corpus: Corpus, judgments: Judgments, splits: Splits, edges: Vec<(String, String)>, translation: TranslationMap) -> Result<Self> {
        judgments.validate(&corpus)?;
        splits.validate(&corpus)?;
        if corpus.targets.is_empty() {
            return Err(Error::Data("corpus has no target documents".into()));
        }
        Ok(Inputs {
            corpus,
            judgments,
            splits,
            edges,
            translation,
        })
    }

    pub fn from_synth(s: &crate::synth::SynthCorpus) -> Result<Self> {
        Self::new(s.corpus()?, s.judgments.clone(), s.splits.clone(), s.edges.clone(), s.translation.clone())
    }

    /// Reads the raw input files named in the configuration.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.require_inputs()?;
        Self::load_with(cfg, Corpus::load(&cfg.paths.corpus)?)
    }

    fn load_with(cfg: &ExperimentConfig, corpus: Corpus) -> Result<Self> {
        let p = &cfg.paths;
        let translation = match &p.translation {
            Some(t) => TranslationMap::load(t)?,
            None => TranslationMap::new(),
        };
        Self::new(corpus, Judgments::load(&p.qrels)?, Splits::load(&p.splits)?, load_edge_list(&p.graph)?, translation)
    }

    pub fn target_ids(&self) -> Vec<&str> {
        self.corpus.targets.sorted_ids()
    }

    pub fn split(&self, name: &str) -> Result<&[String]> {
        self.splits.get(name).ok_or_else(|| Error::Config(format!("unknown split {name:?}")))
    }

    /// Judgments restricted to the queries of one split.
    pub fn judgments_for(&self, split: &str) -> Result<Judgments> {
        let mut j = Judgments::new();
        for q in self.split(split)? {
            for (d, g) in self.judgments.for_query(q).into_iter().flatten() {
                j.insert(q, d, *g)?;
            }
        }
        Ok(j)
    }
}

/// Word vocabulary over queries and targets.
pub fn word_vocab(inputs: &Inputs, cfg: &ExperimentConfig) -> Result<Vocabulary> {
    build_vocab(inputs.corpus.iter(), cfg.corpus.min_count)
}

/// Skip-gram word vectors over every document of the corpus, both sides
/// sharing one space.
pub fn pretrain_words(inputs: &Inputs, vocab: Vocabulary, cfg: &ExperimentConfig) -> Result<EmbeddingMatrix> {
    let sequences: Vec<Vec<usize>> = inputs.corpus.iter().map(|d| vocab.encode(&d.tokens)).collect();
    Ok(train_sgns(&sequences, vocab, &cfg.words)?.without_output())
}

/// Category graph over the edge list plus every label used by a document.
pub fn category_graph(inputs: &Inputs) -> Result<CategoryGraph> {
    CategoryGraph::build(
        inputs.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        inputs.corpus.iter().flat_map(|d| d.meta_labels.iter().map(String::as_str)),
    )
}

pub fn pretrain_categories(inputs: &Inputs, cfg: &ExperimentConfig) -> Result<EmbeddingMatrix> {
    let g = category_graph(inputs)?;
    train_category_embeddings(&g, &cfg.categories.walks(), &cfg.categories.sgns())
}

/// Training pairs for the train split; negatives come from all targets.
pub fn training_pairs(inputs: &Inputs, cfg: &ExperimentConfig, seed: u64) -> Result<PairSample> {
    let j = inputs.judgments_for("train")?;
    let pool = inputs.target_ids();
    build_training_pairs(&j, &pool, &cfg.pairs, seed)
}

/// Candidate sets for the queries of `split`: tf-idf preselection when an
/// index is given, otherwise `n` irrelevant documents sampled with `seed`.
pub fn candidate_sets(inputs: &Inputs, split: &str, n: usize, seed: u64, index: Option<&InvertedIndex>) -> Result<Vec<CandidateSet>> {
    let pool = inputs.target_ids();
    inputs
        .split(split)?
        .iter()
        .map(|q| {
            let query = inputs.corpus.queries.require(q)?;
            match index {
                Some(ix) => preselect(ix, query, n, &inputs.judgments),
                None => sample_candidates(&pool, query, n, &inputs.judgments, None, seed),
            }
        })
        .collect()
}

fn candidate_docs<'a>(inputs: &'a Inputs, set: &CandidateSet) -> Result<(&'a Document, Vec<&'a Document>)> {
    let q = inputs.corpus.queries.require(&set.query_id)?;
    let docs = set.doc_ids().map(|d| inputs.corpus.targets.require(d)).collect::<Result<_>>()?;
    Ok((q, docs))
}

pub fn dev_queries<'a>(inputs: &'a Inputs, sets: &[CandidateSet]) -> Result<Vec<DevQuery<'a>>> {
    sets.iter()
        .map(|s| {
            let (query, candidates) = candidate_docs(inputs, s)?;
            Ok(DevQuery { query, candidates })
        })
        .collect()
}

/// Trains one model of `mode` for run `seed`: pairs, dev candidates,
/// initialisation, dropout and batch order all derive from it.
pub fn train_model(
    inputs: &Inputs,
    words: Option<Arc<EmbeddingMatrix>>,
    categories: Option<Arc<EmbeddingMatrix>>,
    mode: Mode,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(RankModel, TrainLog)> {
    let spec = crate::ranker::ModelSpec { mode, ..cfg.model.clone() };
    let model = RankModel::new(spec, words, categories, seed)?;
    let pairs = training_pairs(inputs, cfg, seed)?;
    train_on_pairs(inputs, model, &pairs.pairs, cfg, seed)
}

pub fn train_on_pairs(inputs: &Inputs, model: RankModel, pairs: &[TrainingPair], cfg: &ExperimentConfig, seed: u64) -> Result<(RankModel, TrainLog)> {
    let dev_sets = candidate_sets(inputs, "dev", cfg.experiment.dev_candidates, seed, None)?;
    let dev = dev_queries(inputs, &dev_sets)?;
    let tcfg = crate::ranker::TrainConfig { seed, ..cfg.train.clone() };
    train(model, pairs, &inputs.corpus, &dev, &inputs.judgments, &tcfg)
}

/// Anything that scores a query's candidates: a single model or a stacked pair.
pub trait Ranker {
    /// Candidates by descending score, ties by ascending id.
    fn rank(&self, query: &Document, candidates: &[&Document]) -> Result<Vec<(String, f64)>>;
}

impl Ranker for RankModel {
    fn rank(&self, query: &Document, candidates: &[&Document]) -> Result<Vec<(String, f64)>> {
        RankModel::rank(self, query, candidates)
    }
}

impl Ranker for StackedModel {
    fn rank(&self, query: &Document, candidates: &[&Document]) -> Result<Vec<(String, f64)>> {
        StackedModel::rank(self, query, candidates)
    }
}

/// Model score of every candidate.
pub fn model_scores<R: Ranker + ?Sized>(model: &R, inputs: &Inputs, set: &CandidateSet) -> Result<HashMap<String, f64>> {
    let (q, docs) = candidate_docs(inputs, set)?;
    Ok(model.rank(q, &docs)?.into_iter().collect())
}

pub fn rank_run(model: &RankModel, inputs: &Inputs, sets: &[CandidateSet]) -> Result<RunList> {
    let queries = sets.iter().map(|s| candidate_docs(inputs, s)).collect::<Result<Vec<_>>>()?;
    let mut run = RunList::new();
    for (s, ranking) in sets.iter().zip(model.rank_many(&queries)?) {
        run.insert(&s.query_id, ranking)?;
    }
    Ok(run)
}

pub fn component_scores(text: &RankModel, meta: &RankModel, inputs: &Inputs, sets: &[CandidateSet]) -> Result<Vec<ComponentScores>> {
    sets.iter()
        .map(|s| {
            let (q, docs) = candidate_docs(inputs, s)?;
            ComponentScores::compute(text, meta, q, &docs)
        })
        .collect()
}

pub fn stacked_run(scores: &[ComponentScores], alpha: f64) -> Result<RunList> {
    let mut run = RunList::new();
    for s in scores {
        run.insert(&s.query_id, s.ranking(alpha))?;
    }
    Ok(run)
}

pub fn rerank_dev<R: Ranker + ?Sized>(model: &R, inputs: &Inputs, sets: &[CandidateSet]) -> Result<Vec<RerankDev>> {
    sets.iter()
        .map(|s| {
            Ok(RerankDev {
                candidates: s.clone(),
                model_scores: model_scores(model, inputs, s)?,
            })
        })
        .collect()
}

pub fn rerank_run(dev: &[RerankDev], lambda: f64) -> Result<RunList> {
    let mut run = RunList::new();
    for q in dev {
        run.insert(&q.candidates.query_id, weighted_rerank(&q.candidates, &q.model_scores, lambda)?)?;
    }
    Ok(run)
}

/// Grid search of the stacking weight on dev candidates of run `seed`.
pub fn tune_alpha(text: &RankModel, meta: &RankModel, inputs: &Inputs, cfg: &ExperimentConfig, seed: u64) -> Result<GridResult> {
    let sets = candidate_sets(inputs, "dev", cfg.experiment.dev_candidates, seed, None)?;
    let scores = component_scores(text, meta, inputs, &sets)?;
    grid_search_alpha(&scores, &inputs.judgments, cfg.experiment.grid_step, cfg.experiment.gain)
}

/// Grid search of the tf-idf weight on tf-idf preselected dev candidates.
pub fn tune_lambda<R: Ranker + ?Sized>(model: &R, inputs: &Inputs, index: &InvertedIndex, cfg: &ExperimentConfig) -> Result<GridResult> {
    let sets = candidate_sets(inputs, "dev", cfg.experiment.dev_candidates, 0, Some(index))?;
    let dev = rerank_dev(model, inputs, &sets)?;
    grid_search_lambda(&dev, &inputs.judgments, cfg.experiment.grid_step, cfg.experiment.gain)
}

/// Sweep table: one `weight<TAB>ndcg` line per grid point.
pub fn sweep_table(r: &GridResult) -> String {
    let mut out = String::from("weight\tndcg\n");
    for (w, v) in &r.sweep {
        out.push_str(&format!("{w}\t{v}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// File-level commands

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Layout {
            root: cfg.paths.output.clone(),
        }
    }

    /// `path` relative to the output directory, for files that refer to
    /// other outputs.
    pub fn relative(&self, path: &Path) -> PathBuf {
        path.strip_prefix(&self.root).unwrap_or(path).to_path_buf()
    }

    /// Inverse of [`relative`](Self::relative); absolute paths pass through.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.root.join(path)
    }

    pub fn tokens(&self) -> PathBuf {
        self.root.join("prepared/corpus.tokens.jsonl")
    }
    pub fn vocab(&self) -> PathBuf {
        self.root.join("prepared/vocab.tsv")
    }
    pub fn index(&self) -> PathBuf {
        self.root.join("prepared/index.txt")
    }
    pub fn pairs(&self, seed: u64) -> PathBuf {
        self.root.join(format!("prepared/pairs.s{seed}.tsv"))
    }
    pub fn words(&self) -> PathBuf {
        self.root.join("embeddings/words.vec")
    }
    pub fn categories(&self) -> PathBuf {
        self.root.join("embeddings/categories.vec")
    }
    pub fn model(&self, mode: Mode, seed: u64) -> PathBuf {
        self.root.join(format!("models/{mode}.s{seed}.model"))
    }
    pub fn train_log(&self, mode: Mode, seed: u64) -> PathBuf {
        self.root.join(format!("models/{mode}.s{seed}.log.json"))
    }
    pub fn tuned(&self, strategy: Strategy, seed: u64) -> PathBuf {
        self.root.join(format!("tune/{strategy}.s{seed}.json"))
    }
    pub fn sweep(&self, strategy: Strategy, seed: u64) -> PathBuf {
        self.root.join(format!("tune/{strategy}.s{seed}.sweep.tsv"))
    }
    pub fn run(&self, strategy: Strategy, size: usize, seed: u64) -> PathBuf {
        self.root.join(format!("runs/{strategy}.n{size}.s{seed}.run"))
    }
    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }
    pub fn report(&self, ext: &str) -> PathBuf {
        self.root.join(format!("reports/report.{ext}"))
    }
    pub fn overlap(&self, ext: &str) -> PathBuf {
        self.root.join(format!("reports/overlap.{ext}"))
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    command: String,
    config_hash: String,
}

fn record(layout: &Layout, command: &str, hash: &str, files: &[PathBuf]) -> Result<()> {
    let path = layout.manifest();
    let mut entries: BTreeMap<String, ManifestEntry> = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
        Err(e) => return Err(Error::io(&path, e)),
    };
    for f in files {
        let rel = layout.relative(f).display().to_string();
        entries.insert(
            rel,
            ManifestEntry {
                command: command.to_string(),
                config_hash: hash.to_string(),
            },
        );
    }
    let json = serde_json::to_string_pretty(&entries).map_err(|e| Error::Data(e.to_string()))?;
    util::write_file(&path, format!("{json}\n").as_bytes())
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} is missing; run `catrank {producer}` first", path.display())))
    }
}

#[derive(Serialize, Deserialize)]
struct TokenRecord {
    id: String,
    side: Side,
    tokens: Vec<String>,
    meta: Vec<String>,
}

fn save_tokens(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut w = util::create(path)?;
    for d in corpus.iter() {
        let rec = TokenRecord {
            id: d.id.clone(),
            side: d.side,
            tokens: d.tokens.clone(),
            meta: d.meta_labels.iter().cloned().collect(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_tokens(path: &Path) -> Result<Corpus> {
    let mut docs = Vec::new();
    for (line_no, line) in util::open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        let rec: TokenRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path.display().to_string(), line_no, e.to_string()))?;
        docs.push(Document::new(rec.id, rec.side, rec.tokens, rec.meta.into_iter().collect())?);
    }
    Corpus::new(docs)
}

/// Inputs with the tokenized corpus cached by `prepare`.
pub fn load_prepared(cfg: &ExperimentConfig) -> Result<Inputs> {
    let layout = Layout::new(cfg);
    require(&layout.tokens(), "prepare")?;
    Inputs::load_with(cfg, load_tokens(&layout.tokens())?)
}

/// Tokenized corpus cache, word vocabulary, tf-idf index over the targets
/// and training pairs for every seed.
pub fn cmd_prepare(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let inputs = Inputs::load(cfg)?;
    let hash = cfg.hash()?;
    let mut written = vec![layout.tokens(), layout.vocab(), layout.index()];
    save_tokens(&layout.tokens(), &inputs.corpus)?;
    word_vocab(&inputs, cfg)?.save(&layout.vocab())?;
    InvertedIndex::build(inputs.corpus.targets.docs())?.save(&layout.index())?;
    for &seed in &cfg.experiment.seeds {
        let sample = training_pairs(&inputs, cfg, seed)?;
        if sample.skipped_queries > 0 {
            log::warn!("seed {seed}: {} train queries had no negatives", sample.skipped_queries);
        }
        save_pairs(&layout.pairs(seed), &sample.pairs, &format!("config {hash} seed {seed}"))?;
        written.push(layout.pairs(seed));
    }
    record(&layout, "prepare", &hash, &written)?;
    Ok(written)
}

pub fn cmd_pretrain_words(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let inputs = load_prepared(cfg)?;
    require(&layout.vocab(), "prepare")?;
    let vocab = Vocabulary::load(&layout.vocab())?;
    let m = pretrain_words(&inputs, vocab, cfg)?;
    save_embeddings(&m, &layout.words())?;
    record(&layout, "pretrain-words", &cfg.hash()?, &[layout.words()])?;
    Ok(vec![layout.words()])
}

pub fn cmd_pretrain_categories(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let inputs = load_prepared(cfg)?;
    let m = pretrain_categories(&inputs, cfg)?;
    save_embeddings(&m, &layout.categories())?;
    record(&layout, "pretrain-categories", &cfg.hash()?, &[layout.categories()])?;
    Ok(vec![layout.categories()])
}

fn load_embedding_arc(path: &Path, producer: &str) -> Result<Arc<EmbeddingMatrix>> {
    require(path, producer)?;
    Ok(Arc::new(load_embeddings(path)?))
}

/// Trains every model the strategy needs, once per seed.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let inputs = load_prepared(cfg)?;
    let hash = cfg.hash()?;
    let modes = cfg.experiment.strategy.modes(cfg.experiment.rerank_mode);
    let words = if modes.iter().any(|m| m.uses_text()) {
        Some(load_embedding_arc(&layout.words(), "pretrain-words")?)
    } else {
        None
    };
    let cats = if modes.iter().any(|m| m.uses_meta()) {
        Some(load_embedding_arc(&layout.categories(), "pretrain-categories")?)
    } else {
        None
    };
    let meta = ModelMetadata {
        config_hash: hash.clone(),
        config: cfg.to_toml()?,
    };
    let mut written = Vec::new();
    for &seed in &cfg.experiment.seeds {
        require(&layout.pairs(seed), "prepare")?;
        let pairs = load_pairs(&layout.pairs(seed))?;
        for &mode in &modes {
            let spec = crate::ranker::ModelSpec { mode, ..cfg.model.clone() };
            let model = RankModel::new(spec, words.clone(), cats.clone(), seed)?;
            log::info!("training {mode} model, seed {seed}, {} pairs", pairs.len());
            let (model, log) = train_on_pairs(&inputs, model, &pairs, cfg, seed)?;
            save_model(&layout.model(mode, seed), &model, &meta)?;
            let json = serde_json::to_string_pretty(&log).map_err(|e| Error::Data(e.to_string()))?;
            util::write_file(&layout.train_log(mode, seed), format!("{json}\n").as_bytes())?;
            written.push(layout.model(mode, seed));
            written.push(layout.train_log(mode, seed));
        }
    }
    record(&layout, "train", &hash, &written)?;
    Ok(written)
}

fn load_trained(layout: &Layout, mode: Mode, seed: u64) -> Result<RankModel> {
    let path = layout.model(mode, seed);
    require(&path, "train")?;
    Ok(load_model(&path)?.0)
}

fn load_stacked(layout: &Layout, manifest: &Path) -> Result<StackedModel> {
    require(manifest, "tune --strategy stacked")?;
    let m = StackedManifest::load(manifest)?;
    let text = load_model(&layout.resolve(&m.text_model))?.0;
    let meta = load_model(&layout.resolve(&m.meta_model))?.0;
    StackedModel::new(Arc::new(text), Arc::new(meta), m.alpha)
}

fn save_rerank_manifest(path: &Path, m: &RerankManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(m).map_err(|e| Error::Data(e.to_string()))?;
    util::write_file(path, format!("{json}\n").as_bytes())
}

/// Weight chosen for a weighted-rerank strategy. `model` is relative to the
/// output directory: a model file, or the stacked manifest for
/// `stacked_weighted_rerank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankManifest {
    pub model: PathBuf,
    pub lambda: f64,
    pub config_hash: String,
}

/// Grid search of the combination weight on dev, once per seed.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let inputs = load_prepared(cfg)?;
    let hash = cfg.hash()?;
    let strategy = cfg.experiment.strategy;
    let mut written = Vec::new();
    for &seed in &cfg.experiment.seeds {
        let result = match strategy {
            Strategy::Stacked => {
                let text = load_trained(&layout, Mode::TextOnly, seed)?;
                let meta = load_trained(&layout, Mode::MetaOnly, seed)?;
                let r = tune_alpha(&text, &meta, &inputs, cfg, seed)?;
                StackedManifest {
                    text_model: layout.relative(&layout.model(Mode::TextOnly, seed)),
                    meta_model: layout.relative(&layout.model(Mode::MetaOnly, seed)),
                    alpha: r.best,
                    config_hash: hash.clone(),
                }
                .save(&layout.tuned(strategy, seed))?;
                r
            }
            Strategy::WeightedRerank => {
                let mode = cfg.experiment.rerank_mode;
                let model = load_trained(&layout, mode, seed)?;
                require(&layout.index(), "prepare")?;
                let index = InvertedIndex::load(&layout.index())?;
                let r = tune_lambda(&model, &inputs, &index, cfg)?;
                let m = RerankManifest {
                    model: layout.relative(&layout.model(mode, seed)),
                    lambda: r.best,
                    config_hash: hash.clone(),
                };
                save_rerank_manifest(&layout.tuned(strategy, seed), &m)?;
                r
            }
            Strategy::StackedWeightedRerank => {
                let manifest = layout.tuned(Strategy::Stacked, seed);
                let stacked = load_stacked(&layout, &manifest)?;
                require(&layout.index(), "prepare")?;
                let index = InvertedIndex::load(&layout.index())?;
                let r = tune_lambda(&stacked, &inputs, &index, cfg)?;
                let m = RerankManifest {
                    model: layout.relative(&manifest),
                    lambda: r.best,
                    config_hash: hash.clone(),
                };
                save_rerank_manifest(&layout.tuned(strategy, seed), &m)?;
                r
            }
            other => {
                return Err(Error::Config(format!("strategy {other} has no weight to tune (use stacked, weighted_rerank or stacked_weighted_rerank)")));
            }
        };
        log::info!("seed {seed}: best weight {} (dev ndcg {:.4})", result.best, result.best_ndcg);
        util::write_file(&layout.sweep(strategy, seed), sweep_table(&result).as_bytes())?;
        written.push(layout.tuned(strategy, seed));
        written.push(layout.sweep(strategy, seed));
    }
    record(&layout, "tune", &hash, &written)?;
    Ok(written)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, producer: &str) -> Result<T> {
    require(path, producer)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Ranks the test queries against every candidate size, once per seed.
pub fn cmd_rank(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(cfg);
    let inputs = load_prepared(cfg)?;
    let hash = cfg.hash()?;
    let e = &cfg.experiment;
    let strategy = e.strategy;
    let index = if strategy.preselects() {
        require(&layout.index(), "prepare")?;
        Some(InvertedIndex::load(&layout.index())?)
    } else {
        None
    };
    let mut written = Vec::new();
    for &seed in &e.seeds {
        for &size in &e.candidate_sizes {
            let sets = candidate_sets(&inputs, "test", size, e.candidate_seed, index.as_ref())?;
            let run = match strategy {
                Strategy::Joint | Strategy::TextOnly | Strategy::MetaOnly => {
                    let mode = strategy.modes(e.rerank_mode)[0];
                    rank_run(&load_trained(&layout, mode, seed)?, &inputs, &sets)?
                }
                Strategy::Stacked => {
                    let m: StackedManifest = read_json(&layout.tuned(strategy, seed), "tune")?;
                    let text = load_model(&layout.resolve(&m.text_model))?.0;
                    let meta = load_model(&layout.resolve(&m.meta_model))?.0;
                    stacked_run(&component_scores(&text, &meta, &inputs, &sets)?, m.alpha)?
                }
                Strategy::Rerank => {
                    let model = load_trained(&layout, e.rerank_mode, seed)?;
                    rerank_run(&rerank_dev(&model, &inputs, &sets)?, 0.0)?
                }
                Strategy::WeightedRerank => {
                    let m: RerankManifest = read_json(&layout.tuned(strategy, seed), "tune")?;
                    let model = load_model(&layout.resolve(&m.model))?.0;
                    rerank_run(&rerank_dev(&model, &inputs, &sets)?, m.lambda)?
                }
                Strategy::StackedWeightedRerank => {
                    let m: RerankManifest = read_json(&layout.tuned(strategy, seed), "tune")?;
                    let stacked = load_stacked(&layout, &layout.resolve(&m.model))?;
                    rerank_run(&rerank_dev(&stacked, &inputs, &sets)?, m.lambda)?
                }
            };
            let tag = RunTag {
                model: strategy.to_string(),
                size,
                seed,
                config_hash: hash.clone(),
            };
            let path = layout.run(strategy, size, seed);
            write_run(&path, &run, &tag.to_string())?;
            written.push(path);
        }
    }
    record(&layout, "rank", &hash, &written)?;
    Ok(written)
}

/// Labels a run by its tag, falling back to the tag itself as model name.
pub fn labelled_run(path: &Path) -> Result<LabelledRun> {
    let (run, tag) = read_run(path)?;
    Ok(match tag.parse::<RunTag>() {
        Ok(t) => LabelledRun {
            model: t.model,
            size: t.size,
            seed: t.seed,
            run,
        },
        Err(_) => LabelledRun {
            model: tag,
            size: 0,
            seed: 0,
            run,
        },
    })
}

/// Evaluates the given run files (or every run under the output directory)
/// and writes the text and TSV reports.
pub fn cmd_evaluate(cfg: &ExperimentConfig, runs: &[PathBuf]) -> Result<ExperimentReport> {
    let layout = Layout::new(cfg);
    let hash = cfg.hash()?;
    let paths: Vec<PathBuf> = if runs.is_empty() {
        let dir = layout.runs_dir();
        let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "run"))
            .collect();
        found.sort();
        found
    } else {
        runs.to_vec()
    };
    if paths.is_empty() {
        return Err(Error::Config("no run files to evaluate; run `catrank rank` first".into()));
    }
    let labelled = paths.iter().map(|p| labelled_run(p)).collect::<Result<Vec<_>>>()?;
    let judgments = Judgments::load(&cfg.paths.qrels)?;
    let e = &cfg.experiment;
    let opts = ReportOptions {
        gain: e.gain,
        baseline: Some(e.baseline.clone()),
        iterations: e.significance_iterations,
        seed: e.significance_seed,
        alpha: e.alpha,
    };
    let report = experiment_report(&labelled, &judgments, &opts, &format!("config {hash}"))?;
    util::write_file(&layout.report("txt"), report.to_text().as_bytes())?;
    util::write_file(&layout.report("tsv"), report.to_tsv().as_bytes())?;
    record(&layout, "evaluate", &hash, &[layout.report("txt"), layout.report("tsv")])?;
    Ok(report)
}

/// Category overlap of every relevant judged pair.
pub fn overlap_of(inputs: &Inputs) -> Result<OverlapHistogram> {
    let mut pairs = Vec::new();
    for (q, d, g) in inputs.judgments.iter() {
        if g >= 1 {
            pairs.push((inputs.corpus.queries.require(q)?, inputs.corpus.targets.require(d)?, g));
        }
    }
    overlap_histogram(&pairs, &inputs.translation)
}

pub fn cmd_analyze_overlap(cfg: &ExperimentConfig) -> Result<OverlapHistogram> {
    let layout = Layout::new(cfg);
    let inputs = Inputs::load(cfg)?;
    let h = overlap_of(&inputs)?;
    util::write_file(&layout.overlap("txt"), format!("{h}\n").as_bytes())?;
    let mut tsv = String::from("bucket\tpairs\tpercent\n");
    for ((label, c), p) in BUCKET_LABELS.iter().zip(&h.counts).zip(&h.percentages) {
        tsv.push_str(&format!("{label}\t{c}\t{p}\n"));
    }
    util::write_file(&layout.overlap("tsv"), tsv.as_bytes())?;
    record(&layout, "analyze-overlap", &cfg.hash()?, &[layout.overlap("txt"), layout.overlap("tsv")])?;
    Ok(h)
}

/// Configuration sized for the synthetic corpora: small embeddings and
/// scorer, every other setting at its default.
pub fn desk_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.paths.translation = Some("translation.txt".into());
    c.words.dim = 32;
    c.words.epochs = 10;
    c.categories.dim = 30;
    c.model.text_filters = 64;
    c.model.cat_filters = 30;
    c.model.hidden = vec![256, 256];
    c.train.epochs = 60;
    c.train.patience = 10;
    c.experiment.dev_candidates = 200;
    c
}
