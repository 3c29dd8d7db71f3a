//! Accept/reject classification of the baseline top-1 and weighted reranking.
//!
//! For each query the baseline top-k documents form a [`ScoreBundle`] of
//! (baseline, word, lemma, embedding) scores. A [`FeedForward`] classifier
//! decides from the min-max normalized bundle whether the baseline top-1
//! stands; if not, the documents are reordered by a weighted sum of their
//! (normalized) scores.

mod classifier;
mod grid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocId;

pub use classifier::{FeedForward, TrainParams};
pub use grid::{grid_candidates, grid_search_weights, GridExample, GridOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RerankError {
    #[error("training data must contain both accepted and rejected examples")]
    SingleClass,
    #[error("feature vector of length {found} where {expected} was expected")]
    Dimension { expected: usize, found: usize },
    #[error("bundle has {rows} rows but k = {k}")]
    TooManyRows { rows: usize, k: usize },
    #[error("non-finite score in bundle row {row}")]
    NonFinite { row: usize },
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("grid step {0} does not divide 1 evenly")]
    GridStep(f64),
    #[error("no development examples for the grid search")]
    EmptyDev,
    #[error("model file: {0}")]
    Model(String),
}

/// Scores of one baseline-ranked document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    /// `None` for padding rows.
    pub doc: Option<DocId>,
    pub e: f64,
    pub w: f64,
    pub l: f64,
    pub m: f64,
}

impl ScoreRow {
    pub fn new(doc: DocId, e: f64, w: f64, l: f64, m: f64) -> Self {
        Self {
            doc: Some(doc),
            e,
            w,
            l,
            m,
        }
    }

    pub const PADDING: ScoreRow = ScoreRow {
        doc: None,
        e: 0.0,
        w: 0.0,
        l: 0.0,
        m: 0.0,
    };

    fn column(&self, c: usize) -> f64 {
        [self.e, self.w, self.l, self.m][c]
    }
}

/// Exactly `k` rows in baseline rank order, zero-padded at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBundle {
    rows: Vec<ScoreRow>,
}

impl ScoreBundle {
    pub fn new(mut rows: Vec<ScoreRow>, k: usize) -> Result<Self, RerankError> {
        if rows.len() > k {
            return Err(RerankError::TooManyRows { rows: rows.len(), k });
        }
        for (i, r) in rows.iter().enumerate() {
            if ![r.e, r.w, r.l, r.m].iter().all(|x| x.is_finite()) {
                return Err(RerankError::NonFinite { row: i });
            }
        }
        rows.resize(k, ScoreRow::PADDING);
        Ok(Self { rows })
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn baseline_top(&self) -> Option<DocId> {
        self.rows.first().and_then(|r| r.doc)
    }

    /// Documents in baseline order.
    pub fn baseline_ranking(&self) -> Vec<DocId> {
        self.rows.iter().filter_map(|r| r.doc).collect()
    }

    /// The four score columns, min-max scaled to [0, 1] over all `k` rows.
    /// A constant column becomes all zeros.
    pub fn normalized_columns(&self) -> [Vec<f64>; 4] {
        std::array::from_fn(|c| {
            let col: Vec<f64> = self.rows.iter().map(|r| r.column(c)).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                vec![0.0; col.len()]
            } else {
                col.iter().map(|x| (x - lo) / (hi - lo)).collect()
            }
        })
    }

    fn raw_columns(&self) -> [Vec<f64>; 4] {
        std::array::from_fn(|c| self.rows.iter().map(|r| r.column(c)).collect())
    }

    pub fn columns(&self, mode: ScoreMode) -> [Vec<f64>; 4] {
        match mode {
            ScoreMode::Normalized => self.normalized_columns(),
            ScoreMode::Raw => self.raw_columns(),
        }
    }
}

/// Classifier input: normalized columns concatenated as
/// (k baseline, k word, k lemma, k embedding).
pub fn assemble_features(bundle: &ScoreBundle) -> Vec<f64> {
    bundle.normalized_columns().concat()
}

/// Whether reranking sums normalized or raw scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    #[default]
    Normalized,
    Raw,
}

/// Rerank weights (λ_e, λ_w, λ_l, λ_m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub e: f64,
    pub w: f64,
    pub l: f64,
    pub m: f64,
}

impl WeightVector {
    pub const UNIT: WeightVector = WeightVector {
        e: 1.0,
        w: 1.0,
        l: 1.0,
        m: 1.0,
    };

    pub fn new(e: f64, w: f64, l: f64, m: f64) -> Result<Self, RerankError> {
        let v = Self { e, w, l, m };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), RerankError> {
        let a = self.as_array();
        if a.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(RerankError::Weights(format!("{a:?} outside [0, 1]")));
        }
        if a.iter().all(|&x| x == 0.0) {
            return Err(RerankError::Weights("all weights are zero".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.e, self.w, self.l, self.m]
    }
}

/// Quantization grid for comparing weighted sums; sums are divided by the
/// total weight first, so positive rescaling of the weights does not move them.
const KEY_SCALE: f64 = 1e12;

fn sum_keys(columns: &[Vec<f64>; 4], weights: [f64; 4]) -> Vec<i64> {
    let total: f64 = weights.iter().sum();
    let k = columns[0].len();
    (0..k)
        .map(|i| {
            let s = weights[0] * columns[0][i]
                + weights[1] * columns[1][i]
                + weights[2] * columns[2][i]
                + weights[3] * columns[3][i];
            (s / total * KEY_SCALE).round() as i64
        })
        .collect()
}

/// Row indices of real documents, best weighted sum first; ties keep baseline order.
pub(crate) fn order_rows(bundle: &ScoreBundle, columns: &[Vec<f64>; 4], weights: [f64; 4]) -> Vec<usize> {
    let keys = sum_keys(columns, weights);
    let mut idx: Vec<usize> = (0..bundle.k()).filter(|&i| bundle.rows[i].doc.is_some()).collect();
    idx.sort_by(|&a, &b| keys[b].cmp(&keys[a]).then(a.cmp(&b)));
    idx
}

/// Documents reordered by the weighted score sum. `weights` must be
/// non-negative with a positive total.
pub fn rerank_ranking(bundle: &ScoreBundle, weights: [f64; 4], mode: ScoreMode) -> Vec<DocId> {
    let columns = bundle.columns(mode);
    order_rows(bundle, &columns, weights)
        .into_iter()
        .filter_map(|i| bundle.rows[i].doc)
        .collect()
}

/// The document with the largest weighted sum; ties go to the better baseline rank.
pub fn rerank(bundle: &ScoreBundle, weights: &WeightVector, mode: ScoreMode) -> Option<DocId> {
    rerank_ranking(bundle, weights.as_array(), mode).first().copied()
}

/// A trained accept classifier with its decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptClassifier {
    pub network: FeedForward,
    pub threshold: f64,
}

impl AcceptClassifier {
    pub fn accept_probability(&self, bundle: &ScoreBundle) -> f64 {
        self.network.predict(&assemble_features(bundle))
    }

    pub fn accepts(&self, bundle: &ScoreBundle) -> bool {
        self.accept_probability(bundle) >= self.threshold
    }
}

/// Trains on `(bundle, baseline top-1 was correct)` pairs.
pub fn train_accept_classifier(
    examples: &[(ScoreBundle, bool)],
    params: TrainParams,
    threshold: f64,
) -> Result<AcceptClassifier, RerankError> {
    let data: Vec<(Vec<f64>, bool)> = examples.iter().map(|(b, y)| (assemble_features(b), *y)).collect();
    Ok(AcceptClassifier {
        network: FeedForward::train(&data, params)?,
        threshold,
    })
}

/// Outcome of the accept-or-rerank pipeline for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub accept_probability: f64,
    pub accepted: bool,
    /// Final ranking: baseline order when accepted, reranked otherwise.
    pub ranking: Vec<DocId>,
}

impl Decision {
    pub fn top(&self) -> Option<DocId> {
        self.ranking.first().copied()
    }
}

/// Keeps the baseline ranking when the classifier's output reaches
/// `threshold`, otherwise reranks with `weights`.
pub fn decide(
    bundle: &ScoreBundle,
    accept_probability: f64,
    weights: &WeightVector,
    threshold: f64,
    mode: ScoreMode,
) -> Decision {
    let accepted = accept_probability >= threshold;
    let ranking = if accepted {
        bundle.baseline_ranking()
    } else {
        rerank_ranking(bundle, weights.as_array(), mode)
    };
    Decision {
        accept_probability,
        accepted,
        ranking,
    }
}

pub fn predict_and_rerank(
    bundle: &ScoreBundle,
    classifier: &AcceptClassifier,
    weights: &WeightVector,
    mode: ScoreMode,
) -> Decision {
    decide(
        bundle,
        classifier.accept_probability(bundle),
        weights,
        classifier.threshold,
        mode,
    )
}
