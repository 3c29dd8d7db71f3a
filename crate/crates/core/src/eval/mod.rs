//! Metrics, result tables and the end-to-end experiment driver.

mod analysis;
mod config;
mod experiment;
mod metrics;
mod table;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bm25::Bm25Error;
use crate::corpus::CorpusError;
use crate::matcher::MatchError;
use crate::reranker::RerankError;

pub use analysis::{failed_query_analysis, FailedAnalysis};
pub use config::{ExperimentConfig, MatchingConfig, PathsConfig, RerankConfig, RetrievalConfig, SplitConfig};
pub use experiment::{
    run_experiment, Experiment, ExperimentReport, GridSummary, Resources, ScoredQuery, TrainedModel, MODEL_FILE,
    RERANK_FILE,
};
pub use metrics::{format_percent, mrr, precision_at_k, round_half_up, QueryResult};
pub use table::{ColumnGroup, ResultTable};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no query results to evaluate")]
    NoResults,
    #[error("cutoff k must be at least 1")]
    ZeroK,
    #[error("query {query_id} lists a document twice")]
    DuplicateDoc { query_id: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{what} not found at {}; {hint}", path.display())]
    MissingArtifact {
        what: &'static str,
        path: PathBuf,
        hint: &'static str,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Bm25(#[from] Bm25Error),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

impl EvalError {
    /// Whether the error stems from configuration or missing inputs rather
    /// than a failure while running.
    pub fn is_config(&self) -> bool {
        matches!(self, EvalError::Config(_) | EvalError::MissingArtifact { .. })
    }
}

/// Writes `contents` to a temporary sibling and renames it into place, so a
/// failed write never leaves a truncated file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}
