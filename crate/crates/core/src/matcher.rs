//! Structure matching: relation comparators and per-document scoring.
//!
//! For every query relation, the best comparator score among the document's
//! candidate relations (those sharing a lemma with it) is taken; a document's
//! score is the sum of these maxima. The running maximum starts at 0, so a
//! negative cosine never lowers a document's score.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bm25::{rank_scores, RankedList};
use crate::corpus::DocId;
use crate::relations::{MatchKey, Relation, RelationIndex, RelationSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("relation has zero origin length")]
    ZeroLength,
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

/// Harmonic mean of two non-negative reals, 0 when both are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Length-normalized overlap score between a document and a query relation.
///
/// With `c` shared keys, the document side is `c / len(r_d)` and the query
/// side `c / len(r_q)`, where `len` is the source sentence length (raised to
/// the relation's own key count when the speaker name makes the word set
/// larger than the sentence). Returns the harmonic mean of the two.
pub fn compare_overlap(r_d: &Relation, r_q: &Relation, key: MatchKey) -> Result<f64, MatchError> {
    if r_d.origin_length() == 0 || r_q.origin_length() == 0 {
        return Err(MatchError::ZeroLength);
    }
    let c = r_d.overlap(r_q, key) as f64;
    let norm = |r: &Relation| r.origin_length().max(r.keys(key).len()) as f64;
    Ok(harmonic_mean(c / norm(r_d), c / norm(r_q)))
}

/// Word vectors of a single dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    /// Inserts or replaces; returns whether the word was already present.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool, MatchError> {
        if vector.len() != self.dimension {
            return Err(MatchError::Format {
                line: 0,
                message: format!(
                    "vector for {word:?} has {} components, expected {}",
                    vector.len(),
                    self.dimension
                ),
            });
        }
        Ok(self.vectors.insert(word.to_string(), vector).is_some())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// The vector for `word`, or zeros when unknown.
    pub fn vector(&self, word: &str) -> Vec<f64> {
        self.get(word)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.dimension])
    }

    /// Parses `word v1 .. vd` lines. An optional leading `count dim` header
    /// line is skipped. Duplicate words keep the last vector and are reported.
    pub fn parse(text: &str) -> Result<(Self, Vec<String>), MatchError> {
        let mut store: Option<EmbeddingStore> = None;
        let mut warnings = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            if fields.len() < 2 {
                return Err(MatchError::Format {
                    line: line_no,
                    message: "expected a word followed by its vector".into(),
                });
            }
            let vector = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| MatchError::Format {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let s = store.get_or_insert_with(|| EmbeddingStore::new(vector.len()));
            if vector.len() != s.dimension {
                return Err(MatchError::Format {
                    line: line_no,
                    message: format!("{} components where {} expected", vector.len(), s.dimension),
                });
            }
            if s.insert(fields[0], vector)? {
                warnings.push(format!(
                    "line {line_no}: duplicate word {:?}, keeping the last vector",
                    fields[0]
                ));
            }
        }
        Ok((store.unwrap_or_default(), warnings))
    }
}

/// Reads an embedding file, logging duplicate-word warnings.
pub fn load_embeddings(path: &Path) -> Result<(EmbeddingStore, Vec<String>), MatchError> {
    let text = std::fs::read_to_string(path).map_err(|e| MatchError::Io(format!("{}: {e}", path.display())))?;
    let (store, warnings) = EmbeddingStore::parse(&text)?;
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok((store, warnings))
}

fn sum_vector(r: &Relation, store: &EmbeddingStore) -> Vec<f64> {
    let mut sum = vec![0.0; store.dimension()];
    for (surface, lemma) in r.embedding_terms() {
        if let Some(v) = store.get(surface).or_else(|| store.get(lemma)) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
    }
    sum
}

/// Cosine of two vectors, 0 if either is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// Cosine between the summed word vectors of two relations. Each distinct
/// surface form is looked up once, falling back to its lemma.
pub fn compare_embedding(r_d: &Relation, r_q: &Relation, store: &EmbeddingStore) -> f64 {
    cosine(&sum_vector(r_d, store), &sum_vector(r_q, store))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparatorKind {
    Word,
    Lemma,
    Embedding,
}

impl ComparatorKind {
    pub const ALL: [ComparatorKind; 3] = [ComparatorKind::Word, ComparatorKind::Lemma, ComparatorKind::Embedding];
}

impl FromStr for ComparatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "word" | "w" => Ok(ComparatorKind::Word),
            "lemma" | "l" => Ok(ComparatorKind::Lemma),
            "embedding" | "m" | "e" => Ok(ComparatorKind::Embedding),
            other => Err(format!("unknown comparator {other:?} (word, lemma, embedding)")),
        }
    }
}

impl fmt::Display for ComparatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComparatorKind::Word => "word",
            ComparatorKind::Lemma => "lemma",
            ComparatorKind::Embedding => "embedding",
        })
    }
}

/// A relation-pair scoring function.
#[derive(Debug, Clone, Copy)]
pub enum Comparator<'a> {
    Word,
    Lemma,
    Embedding(&'a EmbeddingStore),
}

impl<'a> Comparator<'a> {
    /// The comparator for `kind`; `store` is only consulted for embeddings.
    pub fn new(kind: ComparatorKind, store: &'a EmbeddingStore) -> Self {
        match kind {
            ComparatorKind::Word => Comparator::Word,
            ComparatorKind::Lemma => Comparator::Lemma,
            ComparatorKind::Embedding => Comparator::Embedding(store),
        }
    }

    pub fn kind(&self) -> ComparatorKind {
        match self {
            Comparator::Word => ComparatorKind::Word,
            Comparator::Lemma => ComparatorKind::Lemma,
            Comparator::Embedding(_) => ComparatorKind::Embedding,
        }
    }

    pub fn score(&self, r_d: &Relation, r_q: &Relation) -> Result<f64, MatchError> {
        match self {
            Comparator::Word => compare_overlap(r_d, r_q, MatchKey::Surface),
            Comparator::Lemma => compare_overlap(r_d, r_q, MatchKey::Lemma),
            Comparator::Embedding(store) => Ok(compare_embedding(r_d, r_q, store)),
        }
    }
}

/// Structure-matching scores, one per input document, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchScores {
    pub scores: Vec<(DocId, f64)>,
}

impl MatchScores {
    pub fn get(&self, doc: DocId) -> Option<f64> {
        self.scores.iter().find(|s| s.0 == doc).map(|s| s.1)
    }
}

/// Scores `docs` against the query relations.
pub fn structure_match(
    docs: &[DocId],
    query_relations: &[Relation],
    source: &dyn RelationSource,
    comparator: Comparator<'_>,
) -> Result<MatchScores, MatchError> {
    let mut scores = Vec::with_capacity(docs.len());
    for &doc in docs {
        let mut total = 0.0;
        for r_q in query_relations {
            let mut best = 0.0f64;
            for r_d in source.candidates(doc, r_q) {
                best = best.max(comparator.score(r_d, r_q)?);
            }
            total += best;
        }
        scores.push((doc, total));
    }
    Ok(MatchScores { scores })
}

/// Documents holding at least one relation that shares a lemma with a query relation.
pub fn candidate_documents(index: &RelationIndex, query_relations: &[Relation]) -> Vec<DocId> {
    let docs: BTreeSet<DocId> = query_relations
        .iter()
        .flat_map(|r| r.keys(MatchKey::Lemma))
        .flat_map(|k| index.lookup(k).iter().map(|&(_, d)| d))
        .collect();
    docs.into_iter().collect()
}

/// Ranks every candidate document by structure score alone; zero scores are dropped.
pub fn structure_rank(
    index: &RelationIndex,
    query_relations: &[Relation],
    comparator: Comparator<'_>,
    k: usize,
) -> Result<RankedList, MatchError> {
    let docs = candidate_documents(index, query_relations);
    let scores = structure_match(&docs, query_relations, index, comparator)?;
    let positive = scores.scores.into_iter().filter(|&(_, s)| s > 0.0).collect();
    Ok(rank_scores(positive, k))
}
