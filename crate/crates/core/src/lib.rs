//! Cross-genre document retrieval.
//!
//! Episode transcripts are ranked against summary and plot sentences with a
//! BM25 baseline ([`bm25`]), re-scored by matching predicate-argument
//! relations ([`relations`], [`matcher`]), and finally reranked by a small
//! accept/reject classifier plus a weighted score sum ([`reranker`]).
//! [`eval`] computes P@k and MRR and drives full experiments.

pub mod bm25;
pub mod corpus;
pub mod eval;
pub mod matcher;
pub mod relations;
pub mod reranker;
