use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Query, QuerySource};

/// Train/dev/eval proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub eval: f64,
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, eval: f64) -> Result<Self, String> {
        let r = Self { train, dev, eval };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), String> {
        let parts = [self.train, self.dev, self.eval];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(format!("split ratios must be non-negative, got {parts:?}"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("split ratios must sum to 1, got {sum}"));
        }
        Ok(())
    }

    /// Part sizes for `n` items by largest remainder, so they always sum to `n`.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let exact = [self.train, self.dev, self.eval].map(|r| r * n as f64);
        let mut sizes = exact.map(|x| x.floor() as usize);
        let mut left = n - sizes.iter().sum::<usize>().min(n);
        let mut order = [0usize, 1, 2];
        // Larger remainder first; earlier part wins ties.
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if exact[i] > 0.0 {
                sizes[i] += 1;
                left -= 1;
            }
        }
        sizes
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7848,
            dev: 0.0985,
            eval: 0.1167,
        }
    }
}

/// A partition of the query set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<Query>,
    pub dev: Vec<Query>,
    pub eval: Vec<Query>,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.eval.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Randomly assigns individual queries to train/dev/eval.
///
/// Queries are shuffled with a ChaCha8 stream seeded by `seed`, then cut into
/// parts sized by [`SplitRatios::sizes`]. Within each part the input order is
/// kept. With `stratified`, summary and plot queries are split separately and
/// the parts concatenated.
pub fn split_queries(queries: &[Query], ratios: SplitRatios, seed: u64, stratified: bool) -> Result<DataSplit, String> {
    ratios.validate()?;
    let strata: Vec<Vec<usize>> = if stratified {
        [QuerySource::Summary, QuerySource::Plot]
            .iter()
            .map(|src| (0..queries.len()).filter(|&i| queries[i].source == *src).collect())
            .collect()
    } else {
        vec![(0..queries.len()).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0u8; queries.len()];
    for mut members in strata {
        members.shuffle(&mut rng);
        let [train, dev, _] = ratios.sizes(members.len());
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = if pos < train {
                0
            } else if pos < train + dev {
                1
            } else {
                2
            };
        }
    }

    let mut split = DataSplit::default();
    for (q, part) in queries.iter().zip(assignment) {
        match part {
            0 => split.train.push(q.clone()),
            1 => split.dev.push(q.clone()),
            _ => split.eval.push(q.clone()),
        }
    }
    Ok(split)
}

/// Serializes a split as `query_id<TAB>part` lines, part one of train/dev/eval.
pub fn write_split(split: &DataSplit) -> String {
    let mut out = String::new();
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("eval", &split.eval)] {
        for q in part {
            out.push_str(&format!("{}\t{name}\n", q.query_id));
        }
    }
    out
}

/// Rebuilds a split from [`write_split`] output. Every query must be listed
/// exactly once; parts keep the order of `queries`.
pub fn parse_split(text: &str, queries: &[Query]) -> Result<DataSplit, String> {
    let mut parts: HashMap<&str, u8> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, part) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected `query_id<TAB>part`", i + 1))?;
        let code = match part {
            "train" => 0,
            "dev" => 1,
            "eval" => 2,
            other => return Err(format!("line {}: unknown part {other:?}", i + 1)),
        };
        if parts.insert(id, code).is_some() {
            return Err(format!("line {}: query {id} listed twice", i + 1));
        }
    }
    let known: HashSet<&str> = queries.iter().map(|q| q.query_id.as_str()).collect();
    if let Some(id) = parts.keys().find(|id| !known.contains(*id)) {
        return Err(format!("split names unknown query {id}"));
    }
    let mut split = DataSplit::default();
    for q in queries {
        match parts.get(q.query_id.as_str()) {
            Some(0) => split.train.push(q.clone()),
            Some(1) => split.dev.push(q.clone()),
            Some(_) => split.eval.push(q.clone()),
            None => return Err(format!("query {} is missing from the split", q.query_id)),
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceBuilder;
    use proptest::prelude::*;

    fn queries(n: usize) -> Vec<Query> {
        let sentence = SentenceBuilder::new()
            .token("x", "x", "NN", "O", 0, "root")
            .build()
            .unwrap();
        (0..n)
            .map(|i| Query {
                query_id: format!("q{i}"),
                text: "x".into(),
                sentence: sentence.clone(),
                source: if i % 4 == 0 {
                    QuerySource::Summary
                } else {
                    QuerySource::Plot
                },
                gold_episode: format!("e{}", i % 7),
            })
            .collect()
    }

    #[test]
    fn table_three_sizes() {
        assert_eq!(SplitRatios::default().sizes(5075), [3983, 500, 592]);
        let split = split_queries(&queries(5075), SplitRatios::default(), 1, false).unwrap();
        assert_eq!((split.train.len(), split.dev.len(), split.eval.len()), (3983, 500, 592));
    }

    #[test]
    fn degenerate_ratio_puts_everything_in_train() {
        let r = SplitRatios::new(1.0, 0.0, 0.0).unwrap();
        let split = split_queries(&queries(37), r, 3, false).unwrap();
        assert_eq!(split.train.len(), 37);
        assert!(split.dev.is_empty() && split.eval.is_empty());
    }

    #[test]
    fn empty_input_is_empty_split() {
        let split = split_queries(&[], SplitRatios::default(), 0, true).unwrap();
        assert!(split.is_empty());
    }

    #[test]
    fn same_seed_same_split() {
        let qs = queries(100);
        let r = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        let a = split_queries(&qs, r, 7, false).unwrap();
        let b = split_queries(&qs, r, 7, false).unwrap();
        assert_eq!(a, b);
        let c = split_queries(&qs, r, 8, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitRatios::new(0.5, 0.5, 0.5).is_err());
        assert!(SplitRatios::new(1.2, -0.2, 0.0).is_err());
    }

    #[test]
    fn stratified_keeps_source_proportions() {
        let qs = queries(400);
        let r = SplitRatios::new(0.5, 0.25, 0.25).unwrap();
        let split = split_queries(&qs, r, 11, true).unwrap();
        let summaries = split.dev.iter().filter(|q| q.source == QuerySource::Summary).count();
        assert_eq!(summaries, 25);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 0usize..200, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0, strat in any::<bool>()) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r = SplitRatios { train: lo, dev: hi - lo, eval: 1.0 - hi };
            prop_assume!(r.validate().is_ok());
            let qs = queries(n);
            let split = split_queries(&qs, r, seed, strat).unwrap();
            prop_assert_eq!(split.len(), n);
            let ids: HashSet<_> = split.train.iter().chain(&split.dev).chain(&split.eval)
                .map(|q| q.query_id.clone()).collect();
            prop_assert_eq!(ids.len(), n);
            prop_assert_eq!(split_queries(&qs, r, seed, strat).unwrap(), split);
        }
    }

    #[test]
    fn split_file_round_trip() {
        let qs = queries(20);
        let split = split_queries(&qs, SplitRatios::new(0.5, 0.25, 0.25).unwrap(), 4, false).unwrap();
        let text = write_split(&split);
        assert_eq!(parse_split(&text, &qs).unwrap(), split);
        assert!(parse_split(&text, &qs[..19]).is_err());
        assert!(parse_split(&text.replacen("\tdev", "\ttest", 1), &qs).is_err());
        let missing: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(parse_split(&missing, &qs).is_err());
    }
}
