use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bm25::{Bm25Index, RankedList};
use crate::corpus::{
    load_corpus, load_queries, parse_split, split_queries, Corpus, DataSplit, DocId, Query, QuerySource,
};
use crate::matcher::{load_embeddings, structure_match, structure_rank, Comparator, ComparatorKind, EmbeddingStore};
use crate::relations::{query_relations, Relation, RelationIndex};
use crate::reranker::{
    decide, grid_search_weights, AcceptClassifier, FeedForward, GridExample, ScoreBundle, ScoreRow, WeightVector,
};

use super::analysis::failed_query_analysis;
use super::config::ExperimentConfig;
use super::metrics::{mrr, precision_at_k, QueryResult};
use super::table::{ColumnGroup, ResultTable};
use super::{write_atomic, EvalError};

pub const MODEL_FILE: &str = "classifier.txt";
pub const RERANK_FILE: &str = "rerank.toml";

const STRUCT_LABELS: [&str; 3] = ["Struct_w", "Struct_l", "Struct_m"];

/// Corpus, queries, both indexes and the embedding store.
pub struct Resources {
    pub corpus: Corpus,
    pub queries: Vec<Query>,
    pub bm25: Bm25Index,
    pub relations: RelationIndex,
    pub embeddings: EmbeddingStore,
}

impl Resources {
    /// Loads every input named by the config and builds both indexes.
    pub fn load(config: &ExperimentConfig) -> Result<Self, EvalError> {
        let corpus_dir = config.corpus_path();
        if !corpus_dir.is_dir() {
            return Err(EvalError::Config(format!(
                "corpus directory {} does not exist",
                corpus_dir.display()
            )));
        }
        let queries_path = config.queries_path();
        if !queries_path.is_file() {
            return Err(EvalError::Config(format!(
                "query file {} does not exist",
                queries_path.display()
            )));
        }
        let corpus = load_corpus(&corpus_dir)?;
        let queries = load_queries(&queries_path, &corpus)?;
        let embeddings = load_embedding_store(config)?;
        let bm25 = Bm25Index::build(&corpus, config.bm25_params(), config.analyzer())?;
        let relations = RelationIndex::build(&corpus);
        log::info!(
            "loaded {} episodes, {} queries, {} relations",
            corpus.len(),
            queries.len(),
            relations.len()
        );
        Ok(Self {
            corpus,
            queries,
            bm25,
            relations,
            embeddings,
        })
    }

    /// Baseline top-`k` documents with their three structure scores.
    pub fn bundle(
        &self,
        baseline: &RankedList,
        query_relations: &[Relation],
        k: usize,
    ) -> Result<ScoreBundle, EvalError> {
        let top: Vec<(DocId, f64)> = baseline.entries.iter().take(k).copied().collect();
        let docs: Vec<DocId> = top.iter().map(|e| e.0).collect();
        let mut columns = Vec::with_capacity(3);
        for kind in ComparatorKind::ALL {
            let comparator = Comparator::new(kind, &self.embeddings);
            columns.push(structure_match(&docs, query_relations, &self.relations, comparator)?.scores);
        }
        let rows = top
            .iter()
            .enumerate()
            .map(|(i, &(doc, e))| ScoreRow::new(doc, e, columns[0][i].1, columns[1][i].1, columns[2][i].1))
            .collect();
        Ok(ScoreBundle::new(rows, k)?)
    }

    /// Runs the baseline and all three structure rankers for one query.
    pub fn score(&self, query: &Query, k: usize, depth: usize) -> Result<ScoredQuery, EvalError> {
        let gold = self.corpus.doc_id(&query.gold_episode).ok_or_else(|| {
            EvalError::Config(format!(
                "query {} names unknown episode {}",
                query.query_id, query.gold_episode
            ))
        })?;
        let qrels = query_relations(query);
        let baseline = self.bm25.search(&query.text, depth.max(k));
        let bundle = self.bundle(&baseline, &qrels, k)?;
        let mut structure: [Vec<DocId>; 3] = Default::default();
        for (slot, kind) in structure.iter_mut().zip(ComparatorKind::ALL) {
            let comparator = Comparator::new(kind, &self.embeddings);
            *slot = structure_rank(&self.relations, &qrels, comparator, k)?.docs();
        }
        Ok(ScoredQuery {
            query_id: query.query_id.clone(),
            source: query.source,
            gold,
            baseline: baseline.docs(),
            bundle,
            structure,
        })
    }
}

fn load_embedding_store(config: &ExperimentConfig) -> Result<EmbeddingStore, EvalError> {
    match config.embeddings_path() {
        Some(path) => {
            if !path.is_file() {
                return Err(EvalError::Config(format!(
                    "embedding file {} does not exist",
                    path.display()
                )));
            }
            Ok(load_embeddings(&path)?.0)
        }
        None => {
            log::warn!("no embedding file configured; embedding scores will all be 0");
            Ok(EmbeddingStore::new(0))
        }
    }
}

/// Everything computed for one query before any training.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredQuery {
    pub query_id: String,
    pub source: QuerySource,
    pub gold: DocId,
    /// Baseline ranking down to the deepest reported cutoff.
    pub baseline: Vec<DocId>,
    pub bundle: ScoreBundle,
    /// Standalone structure rankings for word, lemma and embedding comparators.
    pub structure: [Vec<DocId>; 3],
}

impl ScoredQuery {
    pub fn baseline_correct(&self) -> bool {
        self.baseline.first() == Some(&self.gold)
    }

    fn result(&self, ranked: Vec<DocId>) -> Result<QueryResult, EvalError> {
        QueryResult::new(self.query_id.clone(), self.source, ranked, self.gold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub hits: usize,
    pub reciprocal_rank_sum: f64,
    pub candidates: usize,
    pub dev_queries: usize,
}

/// The trained accept classifier and the rerank weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub classifier: AcceptClassifier,
    pub weights: WeightVector,
    pub grid: Option<GridSummary>,
    pub config_hash: String,
    pub train_examples: usize,
    pub train_accepts: usize,
}

#[derive(Serialize, Deserialize)]
struct RerankFile {
    config_hash: String,
    threshold: f64,
    weights: [f64; 4],
    train_examples: usize,
    train_accepts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSummary>,
}

impl TrainedModel {
    pub fn save(&self, dir: &Path, comments: &[String]) -> Result<(), EvalError> {
        write_atomic(&dir.join(MODEL_FILE), &self.classifier.network.to_text(comments))?;
        let file = RerankFile {
            config_hash: self.config_hash.clone(),
            threshold: self.classifier.threshold,
            weights: self.weights.as_array(),
            train_examples: self.train_examples,
            train_accepts: self.train_accepts,
            grid: self.grid.clone(),
        };
        let mut text = String::new();
        for c in comments {
            writeln!(text, "# {c}").unwrap();
        }
        text.push_str(&toml::to_string(&file).expect("rerank file serializes"));
        write_atomic(&dir.join(RERANK_FILE), &text)
    }

    pub fn load(dir: &Path) -> Result<Self, EvalError> {
        let read = |name: &str| {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(EvalError::MissingArtifact {
                    what: "trained model",
                    path,
                    hint: "run `xgenre train` first",
                });
            }
            std::fs::read_to_string(&path).map_err(|source| EvalError::Io { path, source })
        };
        let network = FeedForward::from_text(&read(MODEL_FILE)?)?;
        let file: RerankFile = toml::from_str(&read(RERANK_FILE)?)
            .map_err(|e| EvalError::Config(format!("{}: {e}", dir.join(RERANK_FILE).display())))?;
        let [e, w, l, m] = file.weights;
        Ok(Self {
            classifier: AcceptClassifier {
                network,
                threshold: file.threshold,
            },
            weights: WeightVector::new(e, w, l, m)?,
            grid: file.grid,
            config_hash: file.config_hash,
            train_examples: file.train_examples,
            train_accepts: file.train_accepts,
        })
    }
}

/// Tables and per-query predictions from one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Models × {dev, eval} × {Summary, Plot, All} × {P@1, MRR}.
    pub main: ResultTable,
    /// Baseline P@k and MRR at each configured cutoff.
    pub depth: ResultTable,
    /// Baseline and structure rankers on the baseline's rank-1 failures.
    pub failed: ResultTable,
    pub predictions: String,
    pub metadata: Vec<String>,
}

impl ExperimentReport {
    pub const FILES: [&'static str; 7] = [
        "results.tsv",
        "results.txt",
        "depth.tsv",
        "depth.txt",
        "failed.tsv",
        "failed.txt",
        "predictions.tsv",
    ];

    pub fn render(&self) -> Vec<(&'static str, String)> {
        let m = &self.metadata;
        let mut predictions = String::new();
        for c in m {
            writeln!(predictions, "# {c}").unwrap();
        }
        predictions.push_str(&self.predictions);
        let files = [
            self.main.to_tsv(m),
            self.main.to_text(m),
            self.depth.to_tsv(m),
            self.depth.to_text(m),
            self.failed.to_tsv(m),
            self.failed.to_text(m),
            predictions,
        ];
        Self::FILES.into_iter().zip(files).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        for (name, text) in self.render() {
            write_atomic(&dir.join(name), &text)?;
        }
        Ok(())
    }
}

/// A prepared run: resources, the query split, and every query scored.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub resources: Resources,
    pub split: DataSplit,
    pub train: Vec<ScoredQuery>,
    pub dev: Vec<ScoredQuery>,
    pub eval: Vec<ScoredQuery>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, EvalError> {
        config.validate()?;
        let resources = Resources::load(&config)?;
        let split = match config.split_path() {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| EvalError::Config(format!("split file {}: {e}", path.display())))?;
                parse_split(&text, &resources.queries)
                    .map_err(|e| EvalError::Config(format!("split file {}: {e}", path.display())))?
            }
            None => split_queries(
                &resources.queries,
                config.split_ratios(),
                config.split.seed,
                config.split.stratified,
            )
            .map_err(EvalError::Config)?,
        };
        Self::with_split(config, resources, split)
    }

    /// Uses a caller-supplied split instead of drawing one.
    pub fn with_split(config: ExperimentConfig, resources: Resources, split: DataSplit) -> Result<Self, EvalError> {
        let k = config.retrieval.k;
        let depth = config.retrieval_depth();
        let score_all = |qs: &[Query]| -> Result<Vec<ScoredQuery>, EvalError> {
            qs.par_iter().map(|q| resources.score(q, k, depth)).collect()
        };
        let train = score_all(&split.train)?;
        let dev = score_all(&split.dev)?;
        let eval = score_all(&split.eval)?;
        Ok(Self {
            config,
            resources,
            split,
            train,
            dev,
            eval,
        })
    }

    /// Hash of the query ids in each part, so two runs can be compared.
    pub fn split_digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, part) in [
            ("train", &self.split.train),
            ("dev", &self.split.dev),
            ("eval", &self.split.eval),
        ] {
            for q in part {
                h.update(format!("{name}\t{}\n", q.query_id).as_bytes());
            }
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    pub fn metadata(&self) -> Vec<String> {
        vec![
            format!("config_hash = {}", self.config.hash()),
            format!("seed = {}", self.config.split.seed),
            format!(
                "split = train {} / dev {} / eval {}",
                self.split.train.len(),
                self.split.dev.len(),
                self.split.eval.len()
            ),
            format!("split_digest = {}", self.split_digest()),
            format!("k = {}", self.config.retrieval.k),
        ]
    }

    /// Trains the accept classifier on the training queries, then picks
    /// rerank weights on the development queries.
    pub fn train(&self) -> Result<TrainedModel, EvalError> {
        let examples: Vec<(ScoreBundle, bool)> = self
            .train
            .iter()
            .map(|q| (q.bundle.clone(), q.baseline_correct()))
            .collect();
        let accepts = examples.iter().filter(|e| e.1).count();
        log::info!(
            "training accept classifier on {} queries ({} accepts)",
            examples.len(),
            accepts
        );
        let classifier =
            crate::reranker::train_accept_classifier(&examples, self.config.classifier, self.config.rerank.threshold)?;

        let (weights, grid) = match self.config.rerank.weights {
            Some([e, w, l, m]) => (WeightVector::new(e, w, l, m)?, None),
            None => {
                let dev: Vec<GridExample> = self
                    .dev
                    .iter()
                    .map(|q| GridExample {
                        bundle: q.bundle.clone(),
                        gold: q.gold,
                        accepted: classifier.accepts(&q.bundle),
                    })
                    .collect();
                let out = grid_search_weights(&dev, self.config.rerank.grid_step, self.config.rerank.score_mode)?;
                log::info!(
                    "grid search: {} candidates, best {:?} with {} dev hits",
                    out.candidates,
                    out.weights.as_array(),
                    out.hits
                );
                (
                    out.weights,
                    Some(GridSummary {
                        hits: out.hits,
                        reciprocal_rank_sum: out.reciprocal_rank_sum,
                        candidates: out.candidates,
                        dev_queries: dev.len(),
                    }),
                )
            }
        };
        Ok(TrainedModel {
            classifier,
            weights,
            grid,
            config_hash: self.config.hash(),
            train_examples: examples.len(),
            train_accepts: accepts,
        })
    }

    fn elastic_label(&self) -> String {
        format!("Elastic_{}", self.config.retrieval.k)
    }

    pub fn model_labels(&self) -> Vec<String> {
        let mut rows = vec![self.elastic_label()];
        rows.extend(STRUCT_LABELS.iter().map(|s| s.to_string()));
        rows.push("Rerank_1".into());
        rows.push("Rerank_lambda".into());
        rows
    }

    /// Per-model results for one part of the split, in [`Self::model_labels`] order.
    pub fn model_results(
        &self,
        part: &[ScoredQuery],
        model: &TrainedModel,
    ) -> Result<Vec<Vec<QueryResult>>, EvalError> {
        let k = self.config.retrieval.k;
        let mode = self.config.rerank.score_mode;
        let threshold = model.classifier.threshold;
        let mut out: Vec<Vec<QueryResult>> = vec![Vec::with_capacity(part.len()); 6];
        for q in part {
            let p = model.classifier.accept_probability(&q.bundle);
            out[0].push(q.result(q.baseline.iter().take(k).copied().collect())?);
            for c in 0..3 {
                out[1 + c].push(q.result(q.structure[c].clone())?);
            }
            out[4].push(q.result(decide(&q.bundle, p, &WeightVector::UNIT, threshold, mode).ranking)?);
            out[5].push(q.result(decide(&q.bundle, p, &model.weights, threshold, mode).ranking)?);
        }
        Ok(out)
    }

    pub fn evaluate(&self, model: &TrainedModel) -> Result<ExperimentReport, EvalError> {
        if model.config_hash != self.config.hash() {
            log::warn!(
                "model was trained under config {} but the current config is {}",
                &model.config_hash[..16.min(model.config_hash.len())],
                self.config.short_hash()
            );
        }
        let parts: [(&str, &[ScoredQuery]); 2] = [("dev", &self.dev), ("eval", &self.eval)];
        let sources: [(&str, Option<QuerySource>); 3] = [
            ("Summary", Some(QuerySource::Summary)),
            ("Plot", Some(QuerySource::Plot)),
            ("All", None),
        ];

        let labels = self.model_labels();
        let groups = parts
            .iter()
            .flat_map(|(p, _)| sources.iter().map(move |(s, _)| ColumnGroup::new(p, s)))
            .collect();
        let mut main = ResultTable::new(
            "Evaluation on the development and evaluation sets",
            "Model",
            labels.clone(),
            groups,
            vec!["P@1".into(), "MRR".into()],
        );

        let depths = &self.config.retrieval.depths;
        let mut depth = ResultTable::new(
            "Baseline results on all queries",
            "k",
            depths.iter().map(usize::to_string).collect(),
            parts.iter().map(|(p, _)| ColumnGroup::new(p, "All")).collect(),
            vec!["P@k".into(), "MRR".into()],
        );

        let mut failed_rows = vec![self.elastic_label()];
        failed_rows.extend(STRUCT_LABELS.iter().map(|s| s.to_string()));
        let mut failed = ResultTable::new(
            "Results on queries failed by the baseline",
            "Model",
            failed_rows,
            parts.iter().map(|(p, _)| ColumnGroup::new(p, "All")).collect(),
            vec!["P@1".into(), "MRR".into()],
        );

        let mut predictions = String::from(
            "query_id\tsplit\tsource\tgold\tbaseline_top\taccept_probability\trerank_1_top\trerank_lambda_top\n",
        );

        for (pi, (part_name, part)) in parts.iter().enumerate() {
            let results = self.model_results(part, model)?;
            for (mi, model_results) in results.iter().enumerate() {
                for (si, (_, source)) in sources.iter().enumerate() {
                    let subset: Vec<QueryResult> = model_results
                        .iter()
                        .filter(|r| source.is_none_or(|s| r.source == s))
                        .cloned()
                        .collect();
                    if subset.is_empty() {
                        continue;
                    }
                    let g = pi * sources.len() + si;
                    main.set(mi, g, 0, precision_at_k(&subset, 1)?);
                    main.set(mi, g, 1, mrr(&subset)?);
                }
            }

            if !part.is_empty() {
                for (di, &d) in depths.iter().enumerate() {
                    let truncated = part
                        .iter()
                        .map(|q| q.result(q.baseline.iter().take(d).copied().collect()))
                        .collect::<Result<Vec<_>, _>>()?;
                    depth.set(di, pi, 0, precision_at_k(&truncated, d)?);
                    depth.set(di, pi, 1, mrr(&truncated)?);
                }
            }

            let by_id = |id: &str| part.iter().find(|q| q.query_id == id).expect("result of this part");
            let rerankers: Vec<(&str, Box<dyn Fn(&QueryResult) -> Vec<DocId>>)> = (0..3)
                .map(|c| {
                    let mode = self.config.rerank.score_mode;
                    let f: Box<dyn Fn(&QueryResult) -> Vec<DocId>> = Box::new(move |r: &QueryResult| {
                        let mut w = [0.0; 4];
                        w[1 + c] = 1.0;
                        crate::reranker::rerank_ranking(&by_id(&r.query_id).bundle, w, mode)
                    });
                    (STRUCT_LABELS[c], f)
                })
                .collect();
            match failed_query_analysis(&self.elastic_label(), &results[0], &rerankers) {
                Ok(analysis) => {
                    for (ri, (_, p1, m)) in analysis.rows.iter().enumerate() {
                        failed.set(ri, pi, 0, *p1);
                        failed.set(ri, pi, 1, *m);
                    }
                }
                Err(EvalError::NoResults) => {}
                Err(e) => return Err(e),
            }

            for (i, q) in part.iter().enumerate() {
                let top = |r: &QueryResult| {
                    r.top()
                        .map_or_else(|| "-".to_string(), |d| self.resources.corpus.name(d).to_string())
                };
                writeln!(
                    predictions,
                    "{}\t{part_name}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
                    q.query_id,
                    q.source.code(),
                    self.resources.corpus.name(q.gold),
                    top(&results[0][i]),
                    model.classifier.accept_probability(&q.bundle),
                    top(&results[4][i]),
                    top(&results[5][i]),
                )
                .unwrap();
            }
        }

        let mut metadata = self.metadata();
        metadata.push(format!("weights = {:?}", model.weights.as_array()));
        metadata.push(format!("threshold = {}", model.classifier.threshold));
        Ok(ExperimentReport {
            main,
            depth,
            failed,
            predictions,
            metadata,
        })
    }
}

/// Prepare, train and evaluate in one go, writing the report to the
/// configured output directory.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    let output = config.output_dir();
    let experiment = Experiment::prepare(config)?;
    let model = experiment.train()?;
    let report = experiment.evaluate(&model)?;
    report.write(&output)?;
    Ok(report)
}
