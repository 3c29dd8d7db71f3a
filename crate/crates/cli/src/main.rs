//! `xgenre`: index episode transcripts, query them, train the reranker and
//! evaluate it, all driven by one TOML config.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xgenre_core::eval::{EvalError, ExperimentConfig};
use xgenre_core::matcher::ComparatorKind;
use xgenre_core::reranker::ScoreMode;

#[derive(Parser)]
#[command(name = "xgenre", version, about = "Cross-genre episode retrieval")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override values from the config file.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Experiment config (TOML).
    #[arg(short, long, global = true, default_value = "xgenre.toml")]
    config: PathBuf,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    queries: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    index_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    model_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Baseline depth handed to the reranker.
    #[arg(short, long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    #[arg(long, global = true)]
    comparator: Option<ComparatorKind>,
    #[arg(long, global = true, value_parser = parse_score_mode)]
    score_mode: Option<ScoreMode>,
    /// Split queries by source before drawing the random split.
    #[arg(long, global = true)]
    stratified: bool,
    /// Ignore any fixed split file and draw the split from the seed.
    #[arg(long, global = true)]
    random_split: bool,
}

fn parse_score_mode(s: &str) -> Result<ScoreMode, String> {
    match s {
        "normalized" => Ok(ScoreMode::Normalized),
        "raw" => Ok(ScoreMode::Raw),
        _ => Err(format!("expected `normalized` or `raw`, got {s:?}")),
    }
}

/// A query given on the command line.
#[derive(Args, Clone)]
struct QueryInput {
    /// Query sentence: inline annotation (`index form lemma pos ner head
    /// deprel pred args | ...`) or plain text without structure.
    text: Option<String>,
    /// Token table file; its first sentence is the query.
    #[arg(long, conflicts_with_all = ["text", "id"])]
    file: Option<PathBuf>,
    /// Id of a query in the configured query file.
    #[arg(long, conflicts_with = "text")]
    id: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist the BM25 and relation indexes.
    Index,
    /// Rank episodes for one query with all four scores and the reranked choice.
    Query(QueryInput),
    /// Print structure-matching scores of every episode for one query.
    Match(QueryInput),
    /// Train the accept classifier and search rerank weights.
    Train,
    /// Evaluate all models and write result tables.
    Evaluate,
    /// Print the relations extracted from one episode.
    DumpRelations {
        /// Episode id, e.g. s01e01.
        episode: String,
    },
}

/// An error with the exit code it maps to.
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = if e.is_config() { 2 } else { 1 };
        Self { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

fn load_config(o: &Overrides) -> Result<ExperimentConfig, Failure> {
    if !o.config.is_file() {
        return Err(Failure::usage(anyhow::anyhow!(
            "config file {} not found (pass one with --config)",
            o.config.display()
        )));
    }
    let mut c = ExperimentConfig::load(&o.config)?;
    // Paths given on the command line are relative to the working directory.
    let cwd = |p: &PathBuf| std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone());
    if let Some(p) = &o.corpus {
        c.paths.corpus = cwd(p);
    }
    if let Some(p) = &o.queries {
        c.paths.queries = cwd(p);
    }
    if let Some(p) = &o.embeddings {
        c.paths.embeddings = Some(cwd(p));
    }
    if let Some(p) = &o.index_dir {
        c.paths.index_dir = cwd(p);
    }
    if let Some(p) = &o.model_dir {
        c.paths.model_dir = cwd(p);
    }
    if let Some(p) = &o.output_dir {
        c.paths.output_dir = cwd(p);
    }
    if let Some(k) = o.k {
        c.retrieval.k = k;
    }
    if let Some(s) = o.seed {
        c.split.seed = s;
    }
    if let Some(t) = o.threshold {
        c.rerank.threshold = t;
    }
    if let Some(g) = o.grid_step {
        c.rerank.grid_step = g;
    }
    if let Some(m) = o.score_mode {
        c.rerank.score_mode = m;
    }
    if let Some(k) = o.comparator {
        c.matching.comparator = k;
    }
    if o.stratified {
        c.split.stratified = true;
    }
    if o.random_split {
        c.paths.split = None;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli.overrides)?;
    log::debug!("config hash {}", config.hash());
    match cli.command {
        Command::Index => commands::index(&config),
        Command::Query(q) => commands::query(&config, &q),
        Command::Match(q) => commands::match_scores(&config, &q),
        Command::Train => commands::train(&config),
        Command::Evaluate => commands::evaluate(&config),
        Command::DumpRelations { episode } => commands::dump_relations(&config, &episode),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
