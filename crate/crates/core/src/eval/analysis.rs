use crate::corpus::DocId;

use super::metrics::{mrr, precision_at_k, QueryResult};
use super::EvalError;

/// P@1 and MRR of the baseline and of each reranker on the queries the
/// baseline got wrong at rank 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedAnalysis {
    pub subset_size: usize,
    /// `(label, P@1, MRR)`, baseline first.
    pub rows: Vec<(String, f64, f64)>,
}

impl FailedAnalysis {
    pub fn row(&self, label: &str) -> Option<(f64, f64)> {
        self.rows.iter().find(|r| r.0 == label).map(|r| (r.1, r.2))
    }
}

/// Selects the baseline failures and re-scores each with every reranker.
/// A reranker maps a failed baseline result to its new ordering.
pub fn failed_query_analysis<F>(
    baseline_label: &str,
    baseline: &[QueryResult],
    rerankers: &[(&str, F)],
) -> Result<FailedAnalysis, EvalError>
where
    F: Fn(&QueryResult) -> Vec<DocId>,
{
    let failed: Vec<&QueryResult> = baseline.iter().filter(|r| r.gold_rank() != Some(1)).collect();
    if failed.is_empty() {
        return Err(EvalError::NoResults);
    }
    let owned: Vec<QueryResult> = failed.iter().map(|r| (*r).clone()).collect();
    let mut rows = vec![(baseline_label.to_string(), precision_at_k(&owned, 1)?, mrr(&owned)?)];
    for (label, f) in rerankers {
        let reranked = failed
            .iter()
            .map(|r| QueryResult::new(r.query_id.clone(), r.source, f(r), r.gold))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((label.to_string(), precision_at_k(&reranked, 1)?, mrr(&reranked)?));
    }
    Ok(FailedAnalysis {
        subset_size: failed.len(),
        rows,
    })
}
