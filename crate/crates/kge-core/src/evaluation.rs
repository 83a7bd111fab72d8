//! Filtered link-prediction ranking, MRR/Hits@N, and repeated-run
//! aggregation.
//!
//! A test triple is ranked on both sides: the right rank scores it against
//! all tail corruptions (h, r, t') that are not known true triples, the left
//! rank against head corruptions (h', r, t). Ties use the mean-rank
//! convention: `rank = 1 + #strictly_better + #equal / 2`, so ranks may be
//! half-integral.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FilterIndex, Triple};
use crate::embedding::ModelParams;
use crate::error::{Error, Result};
use crate::scoring::score_unchecked;

/// Anything that can score an id triple. Implementations must be cheap to
/// call and safe to share across evaluation threads.
pub trait Scorer: Sync {
    fn score_ids(&self, head: usize, relation: usize, tail: usize) -> f64;
}

impl Scorer for ModelParams {
    fn score_ids(&self, head: usize, relation: usize, tail: usize) -> f64 {
        score_unchecked(self, Triple::new(head, relation, tail))
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score_ids(&self, head: usize, relation: usize, tail: usize) -> f64 {
        (**self).score_ids(head, relation, tail)
    }
}

/// Adapter for closure-based scorers, mainly used in tests.
pub struct FnScorer<F>(pub F);

impl<F: Fn(usize, usize, usize) -> f64 + Sync> Scorer for FnScorer<F> {
    fn score_ids(&self, head: usize, relation: usize, tail: usize) -> f64 {
        (self.0)(head, relation, tail)
    }
}

/// Left (head-corruption) and right (tail-corruption) filtered ranks of one
/// test triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub triple: Triple,
    pub left_rank: f64,
    pub right_rank: f64,
}

/// Computes both filtered ranks of `triple`. Candidate corruptions that form
/// known true triples (per `filter`) are excluded; the test triple itself is
/// always a candidate.
pub fn filtered_ranks<S: Scorer>(
    scorer: &S,
    triple: Triple,
    filter: &FilterIndex,
    entities: usize,
) -> RankResult {
    let base = scorer.score_ids(triple.head, triple.relation, triple.tail);

    let known_tails = filter.tails(triple.head, triple.relation);
    let mut better = 0usize;
    let mut equal = 0usize;
    for tail in 0..entities {
        if tail == triple.tail || known_tails.is_some_and(|s| s.contains(&tail)) {
            continue;
        }
        let s = scorer.score_ids(triple.head, triple.relation, tail);
        if s > base {
            better += 1;
        } else if s == base {
            equal += 1;
        }
    }
    let right_rank = 1.0 + better as f64 + equal as f64 / 2.0;

    let known_heads = filter.heads(triple.relation, triple.tail);
    let mut better = 0usize;
    let mut equal = 0usize;
    for head in 0..entities {
        if head == triple.head || known_heads.is_some_and(|s| s.contains(&head)) {
            continue;
        }
        let s = scorer.score_ids(head, triple.relation, triple.tail);
        if s > base {
            better += 1;
        } else if s == base {
            equal += 1;
        }
    }
    let left_rank = 1.0 + better as f64 + equal as f64 / 2.0;

    RankResult {
        triple,
        left_rank,
        right_rank,
    }
}

/// Filtered MRR and Hits@N over a set of ranked triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mrr: f64,
    /// Hits@N keyed by N, fraction of the 2n ranks with rank <= N.
    pub hits: BTreeMap<usize, f64>,
    /// Per-triple ranks; empty when stripped for compact reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranks: Vec<RankResult>,
}

impl MetricsReport {
    /// Copy without the per-triple ranks.
    pub fn summary(&self) -> MetricsReport {
        MetricsReport {
            mrr: self.mrr,
            hits: self.hits.clone(),
            ranks: Vec::new(),
        }
    }

    pub fn hits_at(&self, n: usize) -> f64 {
        self.hits.get(&n).copied().unwrap_or(0.0)
    }
}

/// Standard cutoffs reported throughout.
pub const DEFAULT_HITS: [usize; 3] = [1, 3, 10];

/// MRR = (1/2n) * sum_i (1/RR_i + 1/LR_i); Hits@N over the 2n ranks.
pub fn metrics_from_ranks(ranks: Vec<RankResult>, ns: &[usize]) -> Result<MetricsReport> {
    if ranks.is_empty() {
        return Err(Error::EmptyRanks);
    }
    let two_n = (2 * ranks.len()) as f64;
    let mut reciprocal_sum = 0.0;
    let mut hit_counts: BTreeMap<usize, usize> = ns.iter().map(|&n| (n, 0)).collect();
    for r in &ranks {
        reciprocal_sum += 1.0 / r.right_rank + 1.0 / r.left_rank;
        for (&n, count) in hit_counts.iter_mut() {
            if r.right_rank <= n as f64 {
                *count += 1;
            }
            if r.left_rank <= n as f64 {
                *count += 1;
            }
        }
    }
    Ok(MetricsReport {
        mrr: reciprocal_sum / two_n,
        hits: hit_counts
            .into_iter()
            .map(|(n, c)| (n, c as f64 / two_n))
            .collect(),
        ranks,
    })
}

/// Ranks every triple of `triples` on both sides, in parallel. The result is
/// independent of the worker count: ranks are computed per triple and
/// reassembled in input order.
pub fn evaluate_split<S: Scorer>(
    scorer: &S,
    triples: &[Triple],
    filter: &FilterIndex,
    entities: usize,
) -> Result<MetricsReport> {
    let ranks: Vec<RankResult> = triples
        .par_iter()
        .map(|&t| filtered_ranks(scorer, t, filter, entities))
        .collect();
    metrics_from_ranks(ranks, &DEFAULT_HITS)
}

/// Evaluates the test split of `dataset`.
pub fn evaluate_model<S: Scorer>(
    scorer: &S,
    dataset: &Dataset,
    filter: &FilterIndex,
) -> Result<MetricsReport> {
    evaluate_split(scorer, &dataset.test, filter, dataset.entity_count())
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

fn aggregate(values: &[f64]) -> Aggregate {
    // Identical runs must aggregate to their common value with zero std,
    // exactly, not up to summation rounding.
    if values.windows(2).all(|w| w[0] == w[1]) {
        return Aggregate {
            mean: values[0],
            std: 0.0,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Aggregate { mean, std }
}

/// Metrics aggregated over repeated runs of one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeatedRunReport {
    pub runs: usize,
    /// True when only one run was aggregated; std is 0 by convention then.
    pub single_run: bool,
    pub mrr: Aggregate,
    pub hits: BTreeMap<usize, Aggregate>,
    pub per_run_mrr: Vec<f64>,
}

/// Per-metric mean and sample (n-1) standard deviation over runs.
pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<RepeatedRunReport> {
    if reports.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let mrr_values: Vec<f64> = reports.iter().map(|r| r.mrr).collect();
    let mut hits = BTreeMap::new();
    let keys: Vec<usize> = reports[0].hits.keys().copied().collect();
    for n in keys {
        let values: Vec<f64> = reports.iter().map(|r| r.hits_at(n)).collect();
        hits.insert(n, aggregate(&values));
    }
    Ok(RepeatedRunReport {
        runs: reports.len(),
        single_run: reports.len() == 1,
        mrr: aggregate(&mrr_values),
        hits,
        per_run_mrr: mrr_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use proptest::prelude::*;

    fn dataset_from_triples(
        entities: usize,
        relations: usize,
        triples: &[(usize, usize, usize)],
    ) -> Dataset {
        let mut ds = Dataset::default();
        for i in 0..entities {
            ds.vocabulary.intern_entity(&format!("e{i}"));
        }
        for i in 0..relations {
            ds.vocabulary.intern_relation(&format!("r{i}"));
        }
        ds.train = triples
            .iter()
            .map(|&(h, r, t)| Triple::new(h, r, t))
            .collect();
        ds
    }

    #[test]
    fn top_scoring_triple_ranks_first() {
        let ds = dataset_from_triples(5, 1, &[(0, 0, 1)]);
        let filter = FilterIndex::build(&ds);
        let scorer = FnScorer(|_, _, t: usize| if t == 1 { 10.0 } else { 0.0 });
        let r = filtered_ranks(&scorer, Triple::new(0, 0, 1), &filter, 5);
        assert_eq!(r.right_rank, 1.0);
    }

    #[test]
    fn all_ties_give_mean_rank() {
        // 5 entities, nothing filtered except the true triple: m = 5
        // candidates on the tail side (4 corruptions + the triple itself),
        // all tied -> rank (m + 1) / 2 = 3.
        let ds = dataset_from_triples(5, 1, &[(0, 0, 1)]);
        let filter = FilterIndex::build(&ds);
        let scorer = FnScorer(|_, _, _| 0.5);
        let r = filtered_ranks(&scorer, Triple::new(0, 0, 1), &filter, 5);
        assert_eq!(r.right_rank, 3.0);
        assert_eq!(r.left_rank, 3.0);
    }

    #[test]
    fn filtered_candidates_are_excluded() {
        // (0,0,2) is known, so tail candidate 2 is excluded even though it
        // would outscore the test triple.
        let ds = dataset_from_triples(4, 1, &[(0, 0, 1), (0, 0, 2)]);
        let filter = FilterIndex::build(&ds);
        let scorer = FnScorer(|_, _, t: usize| {
            if t == 2 {
                100.0
            } else if t == 1 {
                1.0
            } else {
                0.0
            }
        });
        let r = filtered_ranks(&scorer, Triple::new(0, 0, 1), &filter, 4);
        assert_eq!(r.right_rank, 1.0);
    }

    #[test]
    fn mrr_small_example() {
        let ranks = vec![RankResult {
            triple: Triple::new(0, 0, 1),
            right_rank: 1.0,
            left_rank: 4.0,
        }];
        let m = metrics_from_ranks(ranks, &DEFAULT_HITS).unwrap();
        assert!((m.mrr - 0.625).abs() < 1e-15);
    }

    #[test]
    fn perfect_model_metrics() {
        let ranks = vec![
            RankResult {
                triple: Triple::new(0, 0, 1),
                right_rank: 1.0,
                left_rank: 1.0,
            };
            3
        ];
        let m = metrics_from_ranks(ranks, &DEFAULT_HITS).unwrap();
        assert_eq!(m.mrr, 1.0);
        assert!(m.hits.values().all(|&h| h == 1.0));
    }

    #[test]
    fn hits_thresholds() {
        let ranks = vec![RankResult {
            triple: Triple::new(0, 0, 1),
            right_rank: 2.0,
            left_rank: 3.0,
        }];
        let m = metrics_from_ranks(ranks, &DEFAULT_HITS).unwrap();
        assert_eq!(m.hits_at(1), 0.0);
        assert_eq!(m.hits_at(3), 1.0);
    }

    #[test]
    fn empty_ranks_rejected() {
        assert!(matches!(
            metrics_from_ranks(vec![], &DEFAULT_HITS),
            Err(Error::EmptyRanks)
        ));
    }

    #[test]
    fn aggregate_two_runs() {
        let mk = |mrr: f64| MetricsReport {
            mrr,
            hits: BTreeMap::from([(1, mrr)]),
            ranks: Vec::new(),
        };
        let rep = aggregate_runs(&[mk(0.5), mk(0.7)]).unwrap();
        assert!((rep.mrr.mean - 0.6).abs() < 1e-15);
        assert!((rep.mrr.std - 0.1414213562373095).abs() < 1e-12);
        assert!(!rep.single_run);
    }

    #[test]
    fn aggregate_three_runs() {
        let mk = |mrr: f64| MetricsReport {
            mrr,
            hits: BTreeMap::new(),
            ranks: Vec::new(),
        };
        let rep = aggregate_runs(&[mk(0.1), mk(0.2), mk(0.3)]).unwrap();
        assert!((rep.mrr.mean - 0.2).abs() < 1e-15);
        assert!((rep.mrr.std - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_runs_have_zero_std() {
        let mk = || MetricsReport {
            mrr: 0.42,
            hits: BTreeMap::from([(10, 0.9)]),
            ranks: Vec::new(),
        };
        let reports: Vec<MetricsReport> = (0..10).map(|_| mk()).collect();
        let rep = aggregate_runs(&reports).unwrap();
        assert_eq!(rep.mrr.std, 0.0);
        assert_eq!(rep.hits[&10].std, 0.0);
    }

    #[test]
    fn single_run_is_flagged() {
        let rep = aggregate_runs(&[MetricsReport {
            mrr: 0.3,
            hits: BTreeMap::new(),
            ranks: Vec::new(),
        }])
        .unwrap();
        assert!(rep.single_run);
        assert_eq!(rep.mrr.std, 0.0);
    }

    /// Deterministic pseudo-random scorer: same value in any code path.
    fn hash_scorer(salt: u64) -> FnScorer<impl Fn(usize, usize, usize) -> f64 + Sync> {
        FnScorer(move |h: usize, r: usize, t: usize| {
            let mut x = salt
                .wrapping_add((h as u64).wrapping_mul(0x9E3779B97F4A7C15))
                .wrapping_add((r as u64).wrapping_mul(0xBF58476D1CE4E5B9))
                .wrapping_add((t as u64).wrapping_mul(0x94D049BB133111EB));
            x ^= x >> 30;
            x = x.wrapping_mul(0xBF58476D1CE4E5B9);
            x ^= x >> 27;
            // Coarse buckets so ties actually occur.
            ((x % 16) as f64) / 4.0
        })
    }

    /// Brute-force oracle: scan every entity, filter by linear search over
    /// the triple list, apply the mean-tie convention directly.
    fn oracle_ranks(
        scorer: &impl Scorer,
        triple: Triple,
        all_triples: &[Triple],
        entities: usize,
    ) -> (f64, f64) {
        let base = scorer.score_ids(triple.head, triple.relation, triple.tail);
        let mut right = (0usize, 0usize);
        for t in 0..entities {
            if t == triple.tail
                || all_triples.contains(&Triple::new(triple.head, triple.relation, t))
            {
                continue;
            }
            let s = scorer.score_ids(triple.head, triple.relation, t);
            if s > base {
                right.0 += 1;
            } else if s == base {
                right.1 += 1;
            }
        }
        let mut left = (0usize, 0usize);
        for h in 0..entities {
            if h == triple.head
                || all_triples.contains(&Triple::new(h, triple.relation, triple.tail))
            {
                continue;
            }
            let s = scorer.score_ids(h, triple.relation, triple.tail);
            if s > base {
                left.0 += 1;
            } else if s == base {
                left.1 += 1;
            }
        }
        (
            1.0 + left.0 as f64 + left.1 as f64 / 2.0,
            1.0 + right.0 as f64 + right.1 as f64 / 2.0,
        )
    }

    proptest! {
        #[test]
        fn ranks_match_bruteforce_oracle(
            raw in proptest::collection::vec((0usize..30, 0usize..3, 0usize..30), 1..120),
            salt in 0u64..1000,
        ) {
            let mut ds = dataset_from_triples(30, 3, &[]);
            for (i, &(h, r, t)) in raw.iter().enumerate() {
                let triple = Triple::new(h, r, t);
                if i % 4 == 0 {
                    ds.test.push(triple);
                } else {
                    ds.train.push(triple);
                }
            }
            if ds.test.is_empty() {
                ds.test.push(Triple::new(raw[0].0, raw[0].1, raw[0].2));
            }
            let filter = FilterIndex::build(&ds);
            let all: Vec<Triple> = ds.all_triples().collect();
            let scorer = hash_scorer(salt);
            for &t in &ds.test {
                let fast = filtered_ranks(&scorer, t, &filter, 30);
                let (left, right) = oracle_ranks(&scorer, t, &all, 30);
                prop_assert_eq!(fast.left_rank, left);
                prop_assert_eq!(fast.right_rank, right);
            }
        }

        /// Shrinking the filter can only push ranks down the list.
        #[test]
        fn removing_filter_entries_never_improves_rank(
            raw in proptest::collection::vec((0usize..20, 0usize..2, 0usize..20), 2..80),
            salt in 0u64..1000,
        ) {
            let mut ds = dataset_from_triples(20, 2, &[]);
            ds.train = raw.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect();
            let test_triple = ds.train[0];
            let full = FilterIndex::build(&ds);
            let mut reduced = FilterIndex::default();
            // Drop the second half of the known triples from the filter.
            for &t in &ds.train[..ds.train.len() / 2] {
                reduced.insert(t);
            }
            reduced.insert(test_triple);
            let scorer = hash_scorer(salt);
            let a = filtered_ranks(&scorer, test_triple, &full, 20);
            let b = filtered_ranks(&scorer, test_triple, &reduced, 20);
            prop_assert!(b.left_rank >= a.left_rank);
            prop_assert!(b.right_rank >= a.right_rank);
        }

        /// Hits@1 <= Hits@3 <= Hits@10 and Hits@1 <= MRR <= 1.
        #[test]
        fn metric_orderings(
            pairs in proptest::collection::vec((1usize..40, 1usize..40), 1..60),
        ) {
            let ranks: Vec<RankResult> = pairs
                .iter()
                .map(|&(l, r)| RankResult {
                    triple: Triple::new(0, 0, 0),
                    left_rank: l as f64,
                    right_rank: r as f64,
                })
                .collect();
            let m = metrics_from_ranks(ranks, &DEFAULT_HITS).unwrap();
            prop_assert!(m.hits_at(1) <= m.hits_at(3));
            prop_assert!(m.hits_at(3) <= m.hits_at(10));
            prop_assert!(m.hits_at(1) <= m.mrr + 1e-15);
            prop_assert!(m.mrr <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn evaluation_is_deterministic_across_worker_counts() {
        let ds = {
            let mut ds = dataset_from_triples(25, 2, &[]);
            for i in 0..40 {
                let t = Triple::new(i % 25, i % 2, (i * 7 + 3) % 25);
                if i % 5 == 0 {
                    ds.test.push(t);
                } else {
                    ds.train.push(t);
                }
            }
            ds
        };
        let filter = FilterIndex::build(&ds);
        let scorer = hash_scorer(99);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| evaluate_model(&scorer, &ds, &filter).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| evaluate_model(&scorer, &ds, &filter).unwrap());
        assert_eq!(single, multi);
    }
}
