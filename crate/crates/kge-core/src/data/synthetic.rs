//! Deterministic synthetic knowledge graphs with controlled relation
//! patterns, used for property tests and desk-scale experiments.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use std::collections::HashSet;

use super::{Dataset, Triple};
use crate::error::{Error, Result};

/// Relation pattern to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Every generated (x, r, y) is accompanied by (y, r, x).
    Symmetric,
    /// Each head links to `fan` distinct tails; tails are not shared.
    OneToMany,
    /// Each tail links to `fan` distinct heads; heads are not shared.
    ManyToOne,
    /// Blocks of `fan` heads fully connected to `fan` tails.
    ManyToMany,
    /// One relation of each pattern (1-1, 1-n, n-1, n-n) plus a symmetric one.
    Mixed,
}

impl Pattern {
    pub fn parse(name: &str) -> Option<Pattern> {
        match name {
            "symmetric" => Some(Pattern::Symmetric),
            "1-n" => Some(Pattern::OneToMany),
            "n-1" => Some(Pattern::ManyToOne),
            "n-n" => Some(Pattern::ManyToMany),
            "mixed" => Some(Pattern::Mixed),
            _ => None,
        }
    }
}

/// Parameters of a synthetic dataset.
///
/// The meaning of `count` depends on the pattern: symmetric pairs
/// (symmetric), head anchors (1-n), tail anchors (n-1), blocks (n-n), or the
/// total triple budget (mixed).
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub pattern: Pattern,
    pub entities: usize,
    pub count: usize,
    pub fan: usize,
    /// Train/valid/test fractions; must sum to 1.
    pub split_fractions: (f64, f64, f64),
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.entities < 2 {
            return Err(Error::InfeasibleSpec(format!(
                "need at least 2 entities, got {}",
                self.entities
            )));
        }
        if self.fan < 1 {
            return Err(Error::InfeasibleSpec("fan must be at least 1".into()));
        }
        let (a, b, c) = self.split_fractions;
        if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::InfeasibleSpec(format!(
                "split fractions ({a}, {b}, {c}) must be nonnegative and sum to 1"
            )));
        }
        Ok(())
    }
}

/// Generates a dataset from `spec`, deterministically for a fixed seed.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dataset = Dataset::default();
    for i in 0..spec.entities {
        dataset.vocabulary.intern_entity(&format!("e{i}"));
    }

    let mut triples = Vec::new();
    match spec.pattern {
        Pattern::Symmetric => {
            let r = dataset.vocabulary.intern_relation("r_sym");
            triples.extend(symmetric_triples(spec.entities, spec.count, r, &mut rng)?);
        }
        Pattern::OneToMany => {
            let r = dataset.vocabulary.intern_relation("r_1toN");
            triples.extend(fan_triples(spec.entities, spec.count, spec.fan, r, false, &mut rng)?);
        }
        Pattern::ManyToOne => {
            let r = dataset.vocabulary.intern_relation("r_Nto1");
            triples.extend(fan_triples(spec.entities, spec.count, spec.fan, r, true, &mut rng)?);
        }
        Pattern::ManyToMany => {
            let r = dataset.vocabulary.intern_relation("r_NtoN");
            triples.extend(block_triples(spec.entities, spec.count, spec.fan, r, &mut rng)?);
        }
        Pattern::Mixed => {
            triples = mixed_triples(spec, &mut dataset, &mut rng)?;
        }
    }

    split_into_dataset(&mut dataset, triples, spec.split_fractions, &mut rng);
    dataset.finalize_stats(0);
    Ok(dataset)
}

/// `count` distinct unordered pairs, each emitted in both directions.
fn symmetric_triples(
    entities: usize,
    count: usize,
    relation: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Triple>> {
    let capacity = entities * (entities - 1) / 2;
    if count > capacity {
        return Err(Error::InfeasibleSpec(format!(
            "{count} symmetric pairs requested but only {capacity} distinct pairs exist over {entities} entities"
        )));
    }
    let mut seen = HashSet::new();
    let mut triples = Vec::with_capacity(2 * count);
    let mut attempts = 0usize;
    while seen.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::InfeasibleSpec(
                "could not place the requested symmetric pairs".into(),
            ));
        }
        let x = rng.gen_range(0..entities);
        let y = rng.gen_range(0..entities);
        if x == y {
            continue;
        }
        let key = (x.min(y), x.max(y));
        if seen.insert(key) {
            triples.push(Triple::new(x, relation, y));
            triples.push(Triple::new(y, relation, x));
        }
    }
    Ok(triples)
}

/// `count` anchors, each linked to `fan` distinct partners; partners are not
/// shared between anchors. `inverted = false` makes anchors heads (1-n),
/// `inverted = true` makes anchors tails (n-1).
fn fan_triples(
    entities: usize,
    count: usize,
    fan: usize,
    relation: usize,
    inverted: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Triple>> {
    if count > entities || count * fan > entities {
        return Err(Error::InfeasibleSpec(format!(
            "{count} anchors with fan {fan} need {count} + {} distinct entities, have {entities}",
            count * fan
        )));
    }
    let mut anchors: Vec<usize> = (0..entities).collect();
    anchors.shuffle(rng);
    let anchors: Vec<usize> = anchors.into_iter().take(count).collect();
    let mut partners: Vec<usize> = (0..entities).collect();
    partners.shuffle(rng);
    let partners: Vec<usize> = partners.into_iter().take(count * fan).collect();

    let mut triples = Vec::with_capacity(count * fan);
    for (i, &anchor) in anchors.iter().enumerate() {
        for &partner in &partners[i * fan..(i + 1) * fan] {
            if inverted {
                triples.push(Triple::new(partner, relation, anchor));
            } else {
                triples.push(Triple::new(anchor, relation, partner));
            }
        }
    }
    Ok(triples)
}

/// `count` blocks of `fan` heads fully connected to `fan` tails.
fn block_triples(
    entities: usize,
    count: usize,
    fan: usize,
    relation: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Triple>> {
    if 2 * fan > entities {
        return Err(Error::InfeasibleSpec(format!(
            "a block needs {} distinct entities, have {entities}",
            2 * fan
        )));
    }
    let mut pairs = HashSet::new();
    let mut triples = Vec::with_capacity(count * fan * fan);
    let mut pool: Vec<usize> = (0..entities).collect();
    for _ in 0..count {
        pool.shuffle(rng);
        let heads = &pool[..fan];
        let tails = &pool[fan..2 * fan];
        for &h in heads {
            for &t in tails {
                if pairs.insert((h, t)) {
                    triples.push(Triple::new(h, relation, t));
                }
            }
        }
    }
    Ok(triples)
}

/// Five relations (symmetric, 1-1, 1-n, n-1, n-n) sharing one entity set,
/// with the triple budget split between them.
///
/// The entity set is organized into clusters so that held-out triples stay
/// inferable from the training split, the way type structure makes them
/// inferable in real graphs: cluster members share a parent (1-n), a
/// category (n-1), a matched partner cluster (1-1) and block links to
/// another cluster (n-n). The symmetric relation instead pairs random
/// members across clusters; those pairs have no cluster support, so a model
/// only predicts a held-out direction from the reverse direction seen in
/// training.
fn mixed_triples(
    spec: &SyntheticSpec,
    dataset: &mut Dataset,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Triple>> {
    let total = spec.count;
    let entities = spec.entities;
    let fan = spec.fan.max(2);

    // Even cluster count so clusters pair up for the 1-1 and n-n relations.
    let clusters = ((entities / 10).max(2)) & !1;
    let members_per_cluster = (entities - 2 * clusters) / clusters;
    if members_per_cluster < 2 || members_per_cluster <= fan {
        return Err(Error::InfeasibleSpec(format!(
            "mixed over {entities} entities leaves clusters of {members_per_cluster} members, need more than fan={fan}"
        )));
    }
    let member_count = clusters * members_per_cluster;

    let r_sym = dataset.vocabulary.intern_relation("r_sym");
    let r_11 = dataset.vocabulary.intern_relation("r_1to1");
    let r_1n = dataset.vocabulary.intern_relation("r_1toN");
    let r_n1 = dataset.vocabulary.intern_relation("r_Nto1");
    let r_nn = dataset.vocabulary.intern_relation("r_NtoN");

    // Shuffled member pool split into clusters; the ids after the members
    // serve as one parent and one category entity per cluster.
    let mut members: Vec<usize> = (0..member_count).collect();
    members.shuffle(rng);
    let cluster_of = |c: usize| &members[c * members_per_cluster..(c + 1) * members_per_cluster];
    let parent_of = |c: usize| member_count + c;
    let category_of = |c: usize| member_count + clusters + c;

    let mut triples = Vec::new();

    // 1-n: each cluster parent links to all its members.
    for c in 0..clusters {
        for &m in cluster_of(c) {
            triples.push(Triple::new(parent_of(c), r_1n, m));
        }
    }
    // n-1: every member links to its cluster category.
    for c in 0..clusters {
        for &m in cluster_of(c) {
            triples.push(Triple::new(m, r_n1, category_of(c)));
        }
    }
    // 1-1: clusters paired up (c, c+1); a permutation over the pair's
    // members keeps every entity head once and tail once.
    for c in (0..clusters).step_by(2) {
        let a = cluster_of(c);
        let b = cluster_of(c + 1);
        for i in 0..members_per_cluster {
            triples.push(Triple::new(a[i], r_11, b[i]));
            triples.push(Triple::new(b[i], r_11, a[(i + 1) % members_per_cluster]));
        }
    }
    // n-n: two rotated cluster pairings; each head links to `fan` members
    // of its partner cluster per pairing. With very few clusters the two
    // rotations coincide, so pairs are deduplicated.
    let mut nn_pairs = HashSet::new();
    for rotation in 0..2usize {
        for c in 0..clusters / 2 {
            let a = cluster_of(c);
            let b = cluster_of(clusters / 2 + (c + rotation) % (clusters / 2));
            for &h in a {
                let mut picks: Vec<usize> = b.to_vec();
                picks.shuffle(rng);
                for &t in picks.iter().take(fan) {
                    if nn_pairs.insert((h, t)) {
                        triples.push(Triple::new(h, r_nn, t));
                    }
                }
            }
        }
    }

    // Symmetric: random cross-member pairs fill the remaining budget.
    let used = triples.len();
    let sym_pairs = (total.saturating_sub(used) / 2)
        .min(member_count * (member_count - 1) / 2)
        .max(1);
    let mut seen = HashSet::new();
    let mut attempts = 0usize;
    while seen.len() < sym_pairs {
        attempts += 1;
        if attempts > 1000 * sym_pairs {
            return Err(Error::InfeasibleSpec(
                "could not place the requested symmetric pairs".into(),
            ));
        }
        let x = members[rng.gen_range(0..member_count)];
        let y = members[rng.gen_range(0..member_count)];
        if x == y {
            continue;
        }
        let key = (x.min(y), x.max(y));
        if seen.insert(key) {
            triples.push(Triple::new(x, r_sym, y));
            triples.push(Triple::new(y, r_sym, x));
        }
    }
    Ok(triples)
}

/// Shuffles `triples` and splits them into train/valid/test by fraction.
fn split_into_dataset(
    dataset: &mut Dataset,
    mut triples: Vec<Triple>,
    fractions: (f64, f64, f64),
    rng: &mut ChaCha8Rng,
) {
    triples.shuffle(rng);
    let n = triples.len();
    let n_train = (fractions.0 * n as f64).round() as usize;
    let n_valid = ((fractions.1 * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    dataset.train = triples[..n_train].to_vec();
    dataset.valid = triples[n_train..n_train + n_valid].to_vec();
    dataset.test = triples[n_train + n_valid..].to_vec();
}
