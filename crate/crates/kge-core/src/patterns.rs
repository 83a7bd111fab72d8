//! Relation-pattern analysis: 1-1/1-n/n-1/n-n categorization, symmetric-rule
//! mining by pair confidence, and per-category metric breakdowns.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::evaluation::{metrics_from_ranks, MetricsReport, RankResult, DEFAULT_HITS};
use crate::data::Triple;

/// Fan-out/fan-in class of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl Category {
    pub fn label(&self) -> &'static str {
        match self {
            Category::OneToOne => "1-1",
            Category::OneToMany => "1-n",
            Category::ManyToOne => "n-1",
            Category::ManyToMany => "n-n",
        }
    }

    pub const ALL: [Category; 4] = [
        Category::OneToOne,
        Category::OneToMany,
        Category::ManyToOne,
        Category::ManyToMany,
    ];
}

/// Category assignment of one relation with the multiplicity averages that
/// produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationCategory {
    pub relation: usize,
    pub category: Category,
    pub tails_per_head: f64,
    pub heads_per_tail: f64,
}

/// Default multiplicity threshold separating "1" from "n".
pub const DEFAULT_CATEGORY_THRESHOLD: f64 = 1.5;

/// Classifies every relation appearing in `train` by its average fan-out
/// (distinct tails per head) and fan-in (distinct heads per tail) over the
/// relation's distinct (head, tail) pairs. Both averages below `threshold`
/// give 1-1, only fan-out at or above gives 1-n, only fan-in n-1, both n-n.
pub fn categorize_relations(train: &[Triple], threshold: f64) -> Vec<RelationCategory> {
    let mut pairs: BTreeMap<usize, HashSet<(usize, usize)>> = BTreeMap::new();
    for t in train {
        pairs.entry(t.relation).or_default().insert((t.head, t.tail));
    }
    pairs
        .into_iter()
        .map(|(relation, pair_set)| {
            let heads: HashSet<usize> = pair_set.iter().map(|&(h, _)| h).collect();
            let tails: HashSet<usize> = pair_set.iter().map(|&(_, t)| t).collect();
            let tails_per_head = pair_set.len() as f64 / heads.len() as f64;
            let heads_per_tail = pair_set.len() as f64 / tails.len() as f64;
            let category = match (tails_per_head >= threshold, heads_per_tail >= threshold) {
                (false, false) => Category::OneToOne,
                (true, false) => Category::OneToMany,
                (false, true) => Category::ManyToOne,
                (true, true) => Category::ManyToMany,
            };
            RelationCategory {
                relation,
                category,
                tails_per_head,
                heads_per_tail,
            }
        })
        .collect()
}

/// A relation whose pairs are mostly reversible: r(x,y) => r(y,x).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricRule {
    pub relation: usize,
    /// Number of distinct (x, y) pairs of the relation.
    pub support: usize,
    /// Fraction of pairs whose reverse is also present.
    pub confidence: f64,
}

/// Mines relations whose reverse-pair confidence reaches
/// `confidence_threshold` with at least `min_support` pairs, sorted by
/// confidence descending (relation id breaks ties).
pub fn mine_symmetric(
    train: &[Triple],
    confidence_threshold: f64,
    min_support: usize,
) -> Vec<SymmetricRule> {
    let mut pairs: BTreeMap<usize, HashSet<(usize, usize)>> = BTreeMap::new();
    for t in train {
        pairs.entry(t.relation).or_default().insert((t.head, t.tail));
    }
    let mut rules: Vec<SymmetricRule> = pairs
        .into_iter()
        .filter_map(|(relation, pair_set)| {
            let support = pair_set.len();
            if support == 0 {
                return None;
            }
            let reversed = pair_set
                .iter()
                .filter(|&&(x, y)| pair_set.contains(&(y, x)))
                .count();
            let confidence = reversed as f64 / support as f64;
            (confidence >= confidence_threshold && support >= min_support).then_some(
                SymmetricRule {
                    relation,
                    support,
                    confidence,
                },
            )
        })
        .collect();
    rules.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap()
            .then(a.relation.cmp(&b.relation))
    });
    rules
}

/// Metric breakdown over the four categories plus a symmetric row. A
/// relation can appear both in its category row and in the symmetric row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryRow {
    pub label: String,
    pub test_triples: usize,
    /// None when the row has no test triples (empty, not zero).
    pub metrics: Option<MetricsReport>,
}

/// Splits `ranks` by the relation categories (from the training split) and
/// the mined symmetric relations, and summarizes each group.
pub fn per_category_report(
    ranks: &[RankResult],
    categories: &[RelationCategory],
    symmetric_rules: &[SymmetricRule],
) -> Vec<CategoryRow> {
    let category_of: HashMap<usize, Category> = categories
        .iter()
        .map(|c| (c.relation, c.category))
        .collect();
    let symmetric: HashSet<usize> = symmetric_rules.iter().map(|r| r.relation).collect();

    let mut rows = Vec::with_capacity(5);
    for cat in Category::ALL {
        let group: Vec<RankResult> = ranks
            .iter()
            .filter(|r| category_of.get(&r.triple.relation) == Some(&cat))
            .copied()
            .collect();
        rows.push(make_row(cat.label(), group));
    }
    let group: Vec<RankResult> = ranks
        .iter()
        .filter(|r| symmetric.contains(&r.triple.relation))
        .copied()
        .collect();
    rows.push(make_row("symmetric", group));
    rows
}

fn make_row(label: &str, ranks: Vec<RankResult>) -> CategoryRow {
    CategoryRow {
        label: label.to_string(),
        test_triples: ranks.len(),
        metrics: if ranks.is_empty() {
            None
        } else {
            Some(
                metrics_from_ranks(ranks, &DEFAULT_HITS)
                    .expect("nonempty ranks summarize")
                    .summary(),
            )
        },
    }
}
