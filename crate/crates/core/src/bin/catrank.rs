use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use catrank::config::{ExperimentConfig, Strategy};
use catrank::pipeline;
use catrank::synth::{generate, SynthConfig};
use catrank::{Error, Result};

#[derive(Parser)]
#[command(name = "catrank", version, about = "Cross-lingual learning-to-rank with text and category embeddings")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a setting, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct WithStrategy {
    #[command(flatten)]
    common: Common,
    /// Shorthand for `--set experiment.strategy=...`.
    #[arg(long)]
    strategy: Option<Strategy>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus and a matching config.toml into a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// 40 queries and 200 documents instead of 300 and 3000.
        #[arg(long)]
        small: bool,
        /// Text and category signals drawn independently, each strong on
        /// its own (ignores --small).
        #[arg(long)]
        independent: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Generator settings as TOML; overrides the other synth flags.
        #[arg(long, value_name = "TOML")]
        from: Option<PathBuf>,
    },
    /// Tokenize, build the vocabulary and tf-idf index, sample training pairs.
    Prepare(Common),
    /// Train skip-gram word embeddings.
    PretrainWords(Common),
    /// Train DeepWalk category embeddings.
    PretrainCategories(Common),
    /// Train the ranking models a strategy needs, one per seed.
    Train(WithStrategy),
    /// Grid-search the stacking or tf-idf weight on dev.
    Tune(WithStrategy),
    /// Rank the test queries and write TREC run files.
    Rank(WithStrategy),
    /// NDCG and significance report over run files.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Run files (default: every run under the output directory).
        runs: Vec<PathBuf>,
    },
    /// Category-overlap histogram of the relevant judged pairs.
    AnalyzeOverlap(Common),
}

fn load(c: &Common, strategy: Option<Strategy>) -> Result<ExperimentConfig> {
    let mut overrides = c.overrides.clone();
    if let Some(s) = strategy {
        overrides.push(format!("experiment.strategy=\"{s}\""));
    }
    ExperimentConfig::load(&c.config, &overrides)
}

fn report(paths: Vec<PathBuf>) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn synth(out: PathBuf, small: bool, independent: bool, seed: u64, from: Option<PathBuf>) -> Result<()> {
    let mut cfg = match (independent, small) {
        (true, _) => SynthConfig::independent(),
        (false, true) => SynthConfig::small(),
        (false, false) => SynthConfig::default(),
    };
    cfg.seed = seed;
    if let Some(path) = from {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        cfg = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    let corpus = generate(&cfg)?;
    corpus.write(&out)?;
    let exp = pipeline::desk_config();
    let path = out.join("config.toml");
    std::fs::write(&path, exp.to_toml()?).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Synth { out, small, independent, seed, from } => synth(out, small, independent, seed, from)?,
        Command::Prepare(c) => report(pipeline::cmd_prepare(&load(&c, None)?)?),
        Command::PretrainWords(c) => report(pipeline::cmd_pretrain_words(&load(&c, None)?)?),
        Command::PretrainCategories(c) => report(pipeline::cmd_pretrain_categories(&load(&c, None)?)?),
        Command::Train(w) => report(pipeline::cmd_train(&load(&w.common, w.strategy)?)?),
        Command::Tune(w) => report(pipeline::cmd_tune(&load(&w.common, w.strategy)?)?),
        Command::Rank(w) => report(pipeline::cmd_rank(&load(&w.common, w.strategy)?)?),
        Command::Evaluate { common, runs } => print!("{}", pipeline::cmd_evaluate(&load(&common, None)?, &runs)?.to_text()),
        Command::AnalyzeOverlap(c) => println!("{}", pipeline::cmd_analyze_overlap(&load(&c, None)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and succeed; usage errors exit 1
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
