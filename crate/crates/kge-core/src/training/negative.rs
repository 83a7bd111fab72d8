//! Random negative sampling and self-adversarial weighting.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Triple;
use crate::error::{Error, Result};

/// Which slot of the positive triple is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionSide {
    Head,
    Tail,
}

/// Corrupted copies of one positive triple, all on the same side.
#[derive(Debug, Clone)]
pub struct NegativeBatch {
    pub triples: Vec<Triple>,
    pub side: CorruptionSide,
}

/// Draws `eta` negatives by replacing the chosen slot with a uniformly
/// random entity id different from the original. Negatives are not filtered
/// against known true triples, so false negatives can occur.
pub fn sample_negatives(
    positive: Triple,
    eta: usize,
    side: CorruptionSide,
    entities: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NegativeBatch> {
    if entities < 2 {
        return Err(Error::TooFewEntities(entities));
    }
    let original = match side {
        CorruptionSide::Head => positive.head,
        CorruptionSide::Tail => positive.tail,
    };
    let mut triples = Vec::with_capacity(eta);
    for _ in 0..eta {
        // Uniform over the entities other than `original`.
        let draw = rng.gen_range(0..entities - 1);
        let id = if draw >= original { draw + 1 } else { draw };
        triples.push(match side {
            CorruptionSide::Head => Triple::new(id, positive.relation, positive.tail),
            CorruptionSide::Tail => Triple::new(positive.head, positive.relation, id),
        });
    }
    Ok(NegativeBatch { triples, side })
}

/// Softmax over negative-sample scores (max-shifted for stability). The
/// weights are treated as constants in backpropagation.
pub fn adversarial_weights(neg_scores: &[f64]) -> Vec<f64> {
    if neg_scores.is_empty() {
        return Vec::new();
    }
    let max = neg_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = neg_scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
