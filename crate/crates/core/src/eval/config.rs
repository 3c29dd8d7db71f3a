use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bm25::{Analyzer, Bm25Params};
use crate::corpus::SplitRatios;
use crate::matcher::ComparatorKind;
use crate::reranker::{ScoreMode, TrainParams, WeightVector};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Fixed train/dev/eval assignment; when absent the split is drawn at random.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(default = "default_index_dir")]
    pub index_dir: PathBuf,
    #[serde(default = "default_model_dir")]
    pub model_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_index_dir() -> PathBuf {
    "out/index".into()
}
fn default_model_dir() -> PathBuf {
    "out/model".into()
}
fn default_output_dir() -> PathBuf {
    "out/results".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Depth of the baseline list handed to the reranker.
    pub k: usize,
    pub k1: f64,
    pub b: f64,
    pub index_speakers: bool,
    /// Cutoffs reported in the baseline depth table.
    pub depths: Vec<usize>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self {
            k: 10,
            k1: p.k1,
            b: p.b,
            index_speakers: Analyzer::default().index_speakers,
            depths: vec![1, 5, 10, 20, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub dev: f64,
    pub eval: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self {
            train: r.train,
            dev: r.dev,
            eval: r.eval,
            seed: 42,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    pub grid_step: f64,
    pub threshold: f64,
    pub score_mode: ScoreMode,
    /// Fixed rerank weights; when set, training skips the grid search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 4]>,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.1,
            threshold: 0.5,
            score_mode: ScoreMode::Normalized,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    /// Comparator used by single-query commands.
    pub comparator: ComparatorKind,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self {
            comparator: ComparatorKind::Lemma,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub rerank: RerankConfig,
    #[serde(default)]
    pub classifier: TrainParams,
    #[serde(default)]
    pub matching: MatchingConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// A config with default parameters for the given inputs.
    pub fn with_paths(corpus: impl Into<PathBuf>, queries: impl Into<PathBuf>) -> Self {
        Self {
            paths: PathsConfig {
                corpus: corpus.into(),
                queries: queries.into(),
                embeddings: None,
                split: None,
                index_dir: default_index_dir(),
                model_dir: default_model_dir(),
                output_dir: default_output_dir(),
            },
            retrieval: RetrievalConfig::default(),
            split: SplitConfig::default(),
            rerank: RerankConfig::default(),
            classifier: TrainParams::default(),
            matching: MatchingConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, EvalError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative paths in it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the serialized config. Paths enter as written, so the hash
    /// does not depend on where the config file lives.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.paths.corpus)
    }
    pub fn queries_path(&self) -> PathBuf {
        self.resolve(&self.paths.queries)
    }
    pub fn embeddings_path(&self) -> Option<PathBuf> {
        self.paths.embeddings.as_deref().map(|p| self.resolve(p))
    }
    pub fn split_path(&self) -> Option<PathBuf> {
        self.paths.split.as_deref().map(|p| self.resolve(p))
    }
    pub fn index_dir(&self) -> PathBuf {
        self.resolve(&self.paths.index_dir)
    }
    pub fn model_dir(&self) -> PathBuf {
        self.resolve(&self.paths.model_dir)
    }
    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output_dir)
    }

    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.retrieval.k1,
            b: self.retrieval.b,
        }
    }

    pub fn analyzer(&self) -> Analyzer {
        Analyzer {
            index_speakers: self.retrieval.index_speakers,
            ..Analyzer::default()
        }
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.split.train,
            dev: self.split.dev,
            eval: self.split.eval,
        }
    }

    /// The deepest cutoff any stage needs from the baseline.
    pub fn retrieval_depth(&self) -> usize {
        self.retrieval
            .depths
            .iter()
            .copied()
            .chain([self.retrieval.k])
            .max()
            .unwrap_or(self.retrieval.k)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Config(m));
        if self.retrieval.k == 0 {
            return bad("retrieval.k must be at least 1".into());
        }
        if self.retrieval.depths.contains(&0) {
            return bad("retrieval.depths must be at least 1".into());
        }
        if !(self.retrieval.k1 >= 0.0 && self.retrieval.k1.is_finite()) {
            return bad(format!("retrieval.k1 = {} must be non-negative", self.retrieval.k1));
        }
        if !(0.0..=1.0).contains(&self.retrieval.b) {
            return bad(format!("retrieval.b = {} must lie in [0, 1]", self.retrieval.b));
        }
        self.split_ratios()
            .validate()
            .map_err(|e| EvalError::Config(format!("split: {e}")))?;
        if !(0.0..=1.0).contains(&self.rerank.threshold) {
            return bad(format!(
                "rerank.threshold = {} must lie in [0, 1]",
                self.rerank.threshold
            ));
        }
        crate::reranker::grid_candidates(self.rerank.grid_step)
            .map_err(|e| EvalError::Config(format!("rerank.grid_step: {e}")))?;
        if let Some([e, w, l, m]) = self.rerank.weights {
            WeightVector::new(e, w, l, m).map_err(|e| EvalError::Config(format!("rerank.weights: {e}")))?;
        }
        let c = &self.classifier;
        if c.hidden == 0 || c.epochs == 0 || c.batch_size == 0 || !(c.learning_rate > 0.0) {
            return bad("classifier: hidden, epochs, batch_size and learning_rate must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[paths]\ncorpus = \"corpus\"\nqueries = \"q.tsv\"\n";

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(c.retrieval.k, 10);
        assert_eq!(c.retrieval.k1, 1.2);
        assert_eq!(c.retrieval.b, 0.75);
        assert_eq!(c.rerank.grid_step, 0.1);
        assert_eq!(c.rerank.threshold, 0.5);
        assert_eq!(c.classifier.hidden, 15);
        assert_eq!(c.corpus_path(), PathBuf::from("/data/corpus"));
        assert_eq!(c.retrieval_depth(), 40);
    }

    #[test]
    fn hash_ignores_location_but_not_parameters() {
        let a = ExperimentConfig::parse(MINIMAL, Path::new("/a")).unwrap();
        let b = ExperimentConfig::parse(MINIMAL, Path::new("/b")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.split.seed += 1;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        c.rerank.weights = Some([1.0, 0.0, 0.5, 0.0]);
        let back = ExperimentConfig::parse(&c.to_toml(), Path::new(".")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        for extra in [
            "[retrieval]\nk = 0\n",
            "[retrieval]\nb = 2.0\n",
            "[split]\ntrain = 0.5\n",
            "[rerank]\ngrid_step = 0.3\n",
            "[rerank]\nthreshold = 1.5\n",
            "[rerank]\nweights = [0.0, 0.0, 0.0, 0.0]\n",
            "[bogus]\nx = 1\n",
        ] {
            let text = format!("{MINIMAL}{extra}");
            assert!(
                matches!(
                    ExperimentConfig::parse(&text, Path::new(".")),
                    Err(EvalError::Config(_))
                ),
                "{extra}"
            );
        }
        assert!(ExperimentConfig::parse("[paths]\ncorpus = \"c\"\n", Path::new(".")).is_err());
    }
}
