use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use xgenre_core::bm25::Bm25Index;
use xgenre_core::corpus::table::{parse_inline, parse_table};
use xgenre_core::corpus::{load_corpus, load_queries, AnnotatedSentence, Corpus, SentenceBuilder};
use xgenre_core::eval::{write_atomic, EvalError, Experiment, ExperimentConfig, Resources, TrainedModel, MODEL_FILE};
use xgenre_core::matcher::{load_embeddings, structure_match, Comparator, EmbeddingStore};
use xgenre_core::relations::{episode_relations, extract_relations, Origin, Relation, RelationIndex};
use xgenre_core::reranker::{decide, WeightVector};

use crate::{Failure, QueryInput};

pub const BM25_FILE: &str = "bm25.idx";
pub const RELATIONS_FILE: &str = "relations.json";

fn header(config: &ExperimentConfig) -> Vec<String> {
    vec![format!("config_hash = {}", config.hash())]
}

fn corpus(config: &ExperimentConfig) -> Result<Corpus, Failure> {
    let dir = config.corpus_path();
    if !dir.is_dir() {
        return Err(Failure::usage(anyhow!(
            "corpus directory {} does not exist",
            dir.display()
        )));
    }
    Ok(load_corpus(&dir).map_err(EvalError::from)?)
}

fn embeddings(config: &ExperimentConfig) -> Result<EmbeddingStore, Failure> {
    match config.embeddings_path() {
        Some(p) if !p.is_file() => Err(Failure::usage(anyhow!("embedding file {} does not exist", p.display()))),
        Some(p) => Ok(load_embeddings(&p).map_err(EvalError::from)?.0),
        None => Ok(EmbeddingStore::new(0)),
    }
}

pub fn index(config: &ExperimentConfig) -> Result<(), Failure> {
    let corpus = corpus(config)?;
    let bm25 = Bm25Index::build(&corpus, config.bm25_params(), config.analyzer()).map_err(EvalError::from)?;
    let relations = RelationIndex::build(&corpus);
    let dir = config.index_dir();
    let comments = header(config);
    write_atomic(&dir.join(BM25_FILE), &bm25.to_text(&comments))?;
    write_atomic(&dir.join(RELATIONS_FILE), &relations.to_json(&comments))?;
    println!(
        "indexed {} episodes ({} terms, {} relations) into {}",
        corpus.len(),
        bm25.terms().count(),
        relations.len(),
        dir.display()
    );
    Ok(())
}

fn read_index_file(dir: &Path, name: &str) -> Result<String, Failure> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(EvalError::MissingArtifact {
            what: "index",
            path,
            hint: "run `xgenre index` first",
        }
        .into());
    }
    std::fs::read_to_string(&path)
        .with_context(|| path.display().to_string())
        .map_err(Failure::from)
}

/// Corpus plus persisted indexes; the query set is not needed here.
fn indexed_resources(config: &ExperimentConfig) -> Result<Resources, Failure> {
    let corpus = corpus(config)?;
    let dir = config.index_dir();
    let bm25 = Bm25Index::from_text(&read_index_file(&dir, BM25_FILE)?)
        .with_context(|| dir.join(BM25_FILE).display().to_string())?;
    let relations = RelationIndex::from_json(&read_index_file(&dir, RELATIONS_FILE)?)
        .map_err(|e| anyhow!("{}: {e}", dir.join(RELATIONS_FILE).display()))?;
    if bm25.doc_count() != corpus.len() {
        return Err(anyhow!(
            "index holds {} episodes but the corpus has {}; rerun `xgenre index`",
            bm25.doc_count(),
            corpus.len()
        )
        .into());
    }
    Ok(Resources {
        corpus,
        queries: Vec::new(),
        bm25,
        relations,
        embeddings: embeddings(config)?,
    })
}

/// Plain text becomes an unannotated sentence: it still drives the
/// baseline but yields no relations.
fn plain_sentence(text: &str) -> Result<AnnotatedSentence, Failure> {
    let mut b = SentenceBuilder::new();
    let words: Vec<&str> = text.split_whitespace().collect();
    for (i, w) in words.iter().enumerate() {
        let head = if i == 0 { 0 } else { 1 };
        b = b.token(
            w,
            &w.to_lowercase(),
            "XX",
            "O",
            head,
            if i == 0 { "root" } else { "dep" },
        );
    }
    b.build().map_err(|e| Failure::usage(anyhow!("query: {e}")))
}

/// The query's text and sentence, from whichever input form was given.
fn read_query(config: &ExperimentConfig, input: &QueryInput) -> Result<(String, AnnotatedSentence), Failure> {
    if let Some(id) = &input.id {
        let corpus = corpus(config)?;
        let queries = load_queries(&config.queries_path(), &corpus).map_err(EvalError::from)?;
        let q = queries.into_iter().find(|q| &q.query_id == id).ok_or_else(|| {
            Failure::usage(anyhow!(
                "no query with id {id:?} in {}",
                config.queries_path().display()
            ))
        })?;
        return Ok((q.text, q.sentence));
    }
    if let Some(path) = &input.file {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))?;
        let block = parse_table(&text)
            .map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))?
            .into_iter()
            .next()
            .ok_or_else(|| Failure::usage(anyhow!("{} holds no sentence", path.display())))?;
        return Ok((block.sentence.text(), block.sentence));
    }
    let text = input.text.as_deref().unwrap_or("").trim();
    if text.is_empty() {
        return Err(Failure::usage(anyhow!("empty query; pass text, --file or --id")));
    }
    let sentence = match parse_inline(text) {
        Ok(s) => s,
        Err(_) => {
            log::warn!("query is not annotated; structure scores will be 0");
            plain_sentence(text)?
        }
    };
    Ok((sentence.text(), sentence))
}

fn relations_of(sentence: &AnnotatedSentence) -> Vec<Relation> {
    extract_relations(sentence, None, Origin::Query { query_id: "cli".into() })
}

pub fn query(config: &ExperimentConfig, input: &QueryInput) -> Result<(), Failure> {
    let (text, sentence) = read_query(config, input)?;
    let res = indexed_resources(config)?;
    let k = config.retrieval.k;
    let qrels = relations_of(&sentence);
    let baseline = res.bm25.search(&text, k);
    let bundle = res.bundle(&baseline, &qrels, k)?;

    let model_dir = config.model_dir();
    let model = if model_dir.join(MODEL_FILE).is_file() {
        Some(TrainedModel::load(&model_dir)?)
    } else {
        None
    };

    println!("# {}", header(config).join("; "));
    println!("query: {text}");
    for r in &qrels {
        println!("relation: {r}");
    }
    println!("rank\tepisode\tbaseline\tword\tlemma\tembedding");
    for (i, row) in bundle.rows().iter().enumerate() {
        let Some(doc) = row.doc else { break };
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            i + 1,
            res.corpus.name(doc),
            row.e,
            row.w,
            row.l,
            row.m
        );
    }
    if baseline.is_empty() {
        println!("no episode matches the query");
        return Ok(());
    }
    let mode = config.rerank.score_mode;
    let decision = match &model {
        Some(m) => decide(
            &bundle,
            m.classifier.accept_probability(&bundle),
            &m.weights,
            m.classifier.threshold,
            mode,
        ),
        None => {
            println!(
                "note: no trained model in {}; reranking with unit weights",
                model_dir.display()
            );
            decide(&bundle, 0.0, &WeightVector::UNIT, config.rerank.threshold, mode)
        }
    };
    if model.is_some() {
        println!(
            "accept probability: {:.4} ({})",
            decision.accept_probability,
            if decision.accepted { "baseline kept" } else { "reranked" }
        );
    }
    if let Some(top) = decision.top() {
        println!("final: {}", res.corpus.name(top));
    }
    Ok(())
}

pub fn match_scores(config: &ExperimentConfig, input: &QueryInput) -> Result<(), Failure> {
    let (text, sentence) = read_query(config, input)?;
    let res = indexed_resources(config)?;
    let qrels = relations_of(&sentence);
    let kind = config.matching.comparator;
    let docs: Vec<_> = res.corpus.doc_ids().collect();
    let scores = structure_match(&docs, &qrels, &res.relations, Comparator::new(kind, &res.embeddings))
        .map_err(EvalError::from)?;
    let mut rows = scores.scores;
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    println!("# {}", header(config).join("; "));
    println!("query: {text}");
    println!("comparator: {kind}");
    println!("episode\tscore");
    for (doc, s) in rows {
        println!("{}\t{s:.6}", res.corpus.name(doc));
    }
    Ok(())
}

pub fn train(config: &ExperimentConfig) -> Result<(), Failure> {
    let experiment = Experiment::prepare(config.clone())?;
    let model = experiment.train()?;
    let dir: PathBuf = config.model_dir();
    model.save(&dir, &experiment.metadata())?;
    println!(
        "trained on {} queries ({} baseline hits); weights {:?}",
        model.train_examples,
        model.train_accepts,
        model.weights.as_array()
    );
    if let Some(g) = &model.grid {
        println!(
            "grid search: {} candidates, {} of {} dev queries at rank 1",
            g.candidates, g.hits, g.dev_queries
        );
    }
    println!("model written to {}", dir.display());
    Ok(())
}

pub fn evaluate(config: &ExperimentConfig) -> Result<(), Failure> {
    let model = TrainedModel::load(&config.model_dir())?;
    let experiment = Experiment::prepare(config.clone())?;
    let report = experiment.evaluate(&model)?;
    let out = config.output_dir();
    report.write(&out)?;
    print!("{}", report.main.to_text(&[]));
    println!("results written to {}", out.display());
    Ok(())
}

pub fn dump_relations(config: &ExperimentConfig, episode: &str) -> Result<(), Failure> {
    let corpus = corpus(config)?;
    let doc = corpus
        .doc_id(episode)
        .ok_or_else(|| Failure::usage(anyhow!("unknown episode {episode:?}")))?;
    for r in episode_relations(&corpus, doc) {
        println!("{r}");
    }
    Ok(())
}
