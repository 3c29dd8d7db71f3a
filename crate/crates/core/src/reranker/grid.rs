//! Exhaustive search over rerank weights on development queries.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::{order_rows, RerankError, ScoreBundle, ScoreMode, WeightVector};
use crate::corpus::DocId;

/// One development query with the classifier decision already made.
#[derive(Debug, Clone)]
pub struct GridExample {
    pub bundle: ScoreBundle,
    pub gold: DocId,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub weights: WeightVector,
    /// Number of dev queries with the gold episode at rank 1.
    pub hits: usize,
    /// Sum of reciprocal gold ranks over dev queries.
    pub reciprocal_rank_sum: f64,
    pub candidates: usize,
}

fn steps_per_unit(step: f64) -> Result<u32, RerankError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(RerankError::GridStep(step));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(RerankError::GridStep(step));
    }
    Ok(n as u32)
}

/// Every weight 4-tuple on the grid `{0, step, ..., 1}` except all zeros,
/// as integer multiples of `step`, in lexicographic order.
pub fn grid_candidates(step: f64) -> Result<Vec<[u32; 4]>, RerankError> {
    let n = steps_per_unit(step)?;
    let mut out = Vec::with_capacity(((n + 1) as usize).pow(4) - 1);
    for a in 0..=n {
        for b in 0..=n {
            for c in 0..=n {
                for d in 0..=n {
                    if a + b + c + d > 0 {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    Ok(out)
}

struct Prepared<'a> {
    example: &'a GridExample,
    columns: [Vec<f64>; 4],
    baseline_rank: Option<usize>,
}

fn gold_rank(order: impl Iterator<Item = Option<DocId>>, gold: DocId) -> Option<usize> {
    order.enumerate().find(|(_, d)| *d == Some(gold)).map(|(i, _)| i + 1)
}

fn evaluate(prepared: &[Prepared<'_>], weights: [f64; 4]) -> (usize, f64) {
    let mut hits = 0;
    let mut rr = 0.0;
    for p in prepared {
        let rank = if p.example.accepted {
            p.baseline_rank
        } else {
            let rows = p.example.bundle.rows();
            let order = order_rows(&p.example.bundle, &p.columns, weights);
            gold_rank(order.into_iter().map(|i| rows[i].doc), p.example.gold)
        };
        if let Some(r) = rank {
            if r == 1 {
                hits += 1;
            }
            rr += 1.0 / r as f64;
        }
    }
    (hits, rr)
}

/// Picks the weights maximizing dev hits at rank 1, then the reciprocal
/// rank sum, then the lexicographically smallest tuple.
pub fn grid_search_weights(dev: &[GridExample], step: f64, mode: ScoreMode) -> Result<GridOutcome, RerankError> {
    if dev.is_empty() {
        return Err(RerankError::EmptyDev);
    }
    let n = steps_per_unit(step)?;
    let candidates = grid_candidates(step)?;
    let prepared: Vec<Prepared<'_>> = dev
        .iter()
        .map(|ex| Prepared {
            example: ex,
            columns: ex.bundle.columns(mode),
            baseline_rank: gold_rank(ex.bundle.rows().iter().map(|r| r.doc), ex.gold),
        })
        .collect();

    let scored: Vec<([u32; 4], usize, f64)> = candidates
        .par_iter()
        .map(|&t| {
            let w = t.map(|i| i as f64 / n as f64);
            let (hits, rr) = evaluate(&prepared, w);
            (t, hits, rr)
        })
        .collect();

    let best = scored
        .iter()
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then(b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
                .then(a.0.cmp(&b.0))
        })
        .expect("grid has at least one candidate");
    let w = best.0.map(|i| i as f64 / n as f64);
    Ok(GridOutcome {
        weights: WeightVector::new(w[0], w[1], w[2], w[3])?,
        hits: best.1,
        reciprocal_rank_sum: best.2,
        candidates: candidates.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reranker::ScoreRow;

    fn bundle(rows: &[(f64, f64, f64, f64)]) -> ScoreBundle {
        ScoreBundle::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(e, w, l, m))| ScoreRow::new(DocId(i as u32), e, w, l, m))
                .collect(),
            rows.len(),
        )
        .unwrap()
    }

    #[test]
    fn unit_step_has_fifteen_candidates() {
        assert_eq!(grid_candidates(1.0).unwrap().len(), 15);
        assert_eq!(grid_candidates(0.5).unwrap().len(), 80);
        assert_eq!(grid_candidates(0.1).unwrap().len(), 14_640);
        assert!(grid_candidates(0.3).is_err());
        assert!(grid_candidates(0.0).is_err());
    }

    #[test]
    fn brute_force_agrees_on_toy_dev_set() {
        let dev = vec![
            GridExample {
                bundle: bundle(&[(5.0, 0.0, 0.0, 0.0), (4.0, 0.0, 1.0, 0.0), (1.0, 1.0, 0.0, 0.0)]),
                gold: DocId(1),
                accepted: false,
            },
            GridExample {
                bundle: bundle(&[(5.0, 0.0, 0.2, 0.0), (4.0, 0.0, 1.0, 0.0), (1.0, 1.0, 0.0, 1.0)]),
                gold: DocId(2),
                accepted: false,
            },
            GridExample {
                bundle: bundle(&[(5.0, 0.0, 0.0, 0.0), (4.0, 1.0, 1.0, 1.0)]),
                gold: DocId(0),
                accepted: true,
            },
        ];
        let out = grid_search_weights(&dev, 1.0, ScoreMode::Normalized).unwrap();
        // oracle: enumerate the 15 tuples directly with a plain reranked-top check
        let mut best: Option<([u32; 4], usize)> = None;
        for t in grid_candidates(1.0).unwrap() {
            let w = t.map(|x| x as f64);
            let mut hits = 0;
            for ex in &dev {
                let top = if ex.accepted {
                    ex.bundle.baseline_top()
                } else {
                    crate::reranker::rerank_ranking(&ex.bundle, w, ScoreMode::Normalized)
                        .first()
                        .copied()
                };
                hits += (top == Some(ex.gold)) as usize;
            }
            if best.map_or(true, |(_, h)| hits > h) {
                best = Some((t, hits));
            }
        }
        assert_eq!(out.hits, best.unwrap().1);
        assert_eq!(out.hits, 3);
        assert_eq!(out.candidates, 15);
    }

    #[test]
    fn ties_pick_smallest_tuple() {
        let dev = vec![GridExample {
            bundle: bundle(&[(5.0, 1.0, 1.0, 1.0), (1.0, 0.0, 0.0, 0.0)]),
            gold: DocId(0),
            accepted: false,
        }];
        let out = grid_search_weights(&dev, 1.0, ScoreMode::Normalized).unwrap();
        assert_eq!(out.weights.as_array(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(out.hits, 1);
    }

    #[test]
    fn empty_dev_is_error() {
        assert_eq!(
            grid_search_weights(&[], 0.1, ScoreMode::Normalized),
            Err(RerankError::EmptyDev)
        );
    }
}
