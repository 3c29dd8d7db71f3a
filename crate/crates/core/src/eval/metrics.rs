use std::collections::HashSet;

use crate::corpus::{DocId, QuerySource};

use super::EvalError;

/// A ranked answer list for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_id: String,
    pub source: QuerySource,
    ranked_docs: Vec<DocId>,
    pub gold: DocId,
}

impl QueryResult {
    pub fn new(
        query_id: impl Into<String>,
        source: QuerySource,
        ranked_docs: Vec<DocId>,
        gold: DocId,
    ) -> Result<Self, EvalError> {
        let query_id = query_id.into();
        let mut seen = HashSet::new();
        if !ranked_docs.iter().all(|d| seen.insert(*d)) {
            return Err(EvalError::DuplicateDoc { query_id });
        }
        Ok(Self {
            query_id,
            source,
            ranked_docs,
            gold,
        })
    }

    pub fn ranked_docs(&self) -> &[DocId] {
        &self.ranked_docs
    }

    /// 1-based rank of the gold document, if retrieved.
    pub fn gold_rank(&self) -> Option<usize> {
        self.ranked_docs.iter().position(|&d| d == self.gold).map(|i| i + 1)
    }

    pub fn top(&self) -> Option<DocId> {
        self.ranked_docs.first().copied()
    }
}

/// Percentage of queries whose gold document is within the top `k`.
pub fn precision_at_k(results: &[QueryResult], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if results.is_empty() {
        return Err(EvalError::NoResults);
    }
    let hits = results
        .iter()
        .filter(|r| r.gold_rank().is_some_and(|rank| rank <= k))
        .count();
    Ok(hits as f64 / results.len() as f64 * 100.0)
}

/// Mean reciprocal gold rank as a percentage; a missing gold counts 0.
pub fn mrr(results: &[QueryResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoResults);
    }
    let sum: f64 = results
        .iter()
        .map(|r| r.gold_rank().map_or(0.0, |rank| 1.0 / rank as f64))
        .sum();
    Ok(sum / results.len() as f64 * 100.0)
}

/// Rounds a non-negative percentage half-up to two decimals. A tiny nudge
/// keeps values such as 46.005, which are stored slightly below their decimal
/// form, rounding up.
pub fn round_half_up(x: f64) -> f64 {
    let scaled = x * 100.0;
    (scaled + 0.5 + 1e-9 * scaled.abs().max(1.0)).floor() / 100.0
}

pub fn format_percent(x: f64) -> String {
    format!("{:.2}", round_half_up(x))
}
