//! The two training losses with exact gradients.
//!
//! Binary logistic loss with self-adversarial negative weighting:
//!
//! `L = -log sig(gamma + f(pos)) - sum_i p_i log sig(-gamma - f(neg_i))
//!      + lambda (||h||_2^2 + ||r||_2^2 + ||t||_2^2)`
//!
//! where the weights `p_i` come from [`adversarial_weights`] and are
//! constants under differentiation. Gamma is 0 and the weights collapse to
//! `1/eta` for the plain binary logistic loss.
//!
//! Multiclass log-loss with N3 regularization, using full negative sampling:
//! the negative log-softmax of `f(h,r,t)` over all head replacements plus
//! the same over all tail replacements, plus
//! `lambda (||h||_3^3 + ||r||_3^3 + ||t||_3^3)` with the elementwise complex
//! modulus for complex kinds.

use std::collections::HashMap;

use crate::data::Triple;
use crate::embedding::ModelParams;
use crate::error::{Error, Result};
use crate::scoring::{
    dot, head_factor, score_and_gradient_rows, score_unchecked, tail_factor,
};

use super::negative::{adversarial_weights, CorruptionSide, NegativeBatch};
use super::TrainConfig;

/// Sparse per-row gradient accumulator. Rows untouched by a batch carry no
/// entry and are skipped by the optimizer.
#[derive(Debug, Clone, Default)]
pub struct GradientBuffer {
    entity: HashMap<usize, Vec<f64>>,
    relation: HashMap<usize, Vec<f64>>,
}

impl GradientBuffer {
    pub fn new() -> Self {
        GradientBuffer::default()
    }

    pub fn add_entity(&mut self, row: usize, coeff: f64, values: &[f64]) {
        let entry = self
            .entity
            .entry(row)
            .or_insert_with(|| vec![0.0; values.len()]);
        for (g, v) in entry.iter_mut().zip(values) {
            *g += coeff * v;
        }
    }

    pub fn add_relation(&mut self, row: usize, coeff: f64, values: &[f64]) {
        let entry = self
            .relation
            .entry(row)
            .or_insert_with(|| vec![0.0; values.len()]);
        for (g, v) in entry.iter_mut().zip(values) {
            *g += coeff * v;
        }
    }

    /// Adds `scale * other` into self.
    pub fn add_scaled(&mut self, other: &GradientBuffer, scale: f64) {
        for (&row, values) in &other.entity {
            self.add_entity(row, scale, values);
        }
        for (&row, values) in &other.relation {
            self.add_relation(row, scale, values);
        }
    }

    pub fn entity_rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.entity.iter().map(|(&r, v)| (r, v.as_slice()))
    }

    pub fn relation_rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.relation.iter().map(|(&r, v)| (r, v.as_slice()))
    }

    pub fn entity_row(&self, row: usize) -> Option<&[f64]> {
        self.entity.get(&row).map(Vec::as_slice)
    }

    pub fn relation_row(&self, row: usize) -> Option<&[f64]> {
        self.relation.get(&row).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_empty() && self.relation.is_empty()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `softplus(x) = ln(1 + e^x)`, computed without overflow; `-log sig(x)`
/// equals `softplus(-x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_finite(score: f64, triple: Triple) -> Result<f64> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::non_finite(triple, None))
    }
}

/// Binary logistic loss of one positive and its negative batch, with
/// adversarial weights recomputed from the current negative scores.
pub fn binary_logistic_loss(
    params: &ModelParams,
    positive: Triple,
    negatives: &NegativeBatch,
    config: &TrainConfig,
) -> Result<(f64, GradientBuffer)> {
    let mut neg_scores = Vec::with_capacity(negatives.triples.len());
    for &neg in &negatives.triples {
        params.check_ids(neg.head, neg.relation, neg.tail)?;
        neg_scores.push(check_finite(score_unchecked(params, neg), neg)?);
    }
    let weights = adversarial_weights(&neg_scores);
    binary_logistic_loss_weighted(params, positive, negatives, &weights, config)
}

/// Same loss with caller-supplied negative weights. This is the
/// differentiation seam: the weights are constants here, so a finite
/// difference of this function is directly comparable to the analytic
/// gradient.
pub fn binary_logistic_loss_weighted(
    params: &ModelParams,
    positive: Triple,
    negatives: &NegativeBatch,
    weights: &[f64],
    config: &TrainConfig,
) -> Result<(f64, GradientBuffer)> {
    if weights.len() != negatives.triples.len() {
        return Err(Error::DimensionMismatch {
            expected: negatives.triples.len(),
            got: weights.len(),
            context: "negative weights".into(),
        });
    }
    params.check_ids(positive.head, positive.relation, positive.tail)?;
    let gamma = config.gamma;
    let lambda = config.lambda;
    let kind = params.kind();
    let norm = params.norm();

    let mut buffer = GradientBuffer::new();
    let (pos_score, pos_grad) = score_and_gradient_rows(
        kind,
        norm,
        params.entity_table().row(positive.head),
        params.relation_table().row(positive.relation),
        params.entity_table().row(positive.tail),
    );
    check_finite(pos_score, positive)?;

    let mut loss = softplus(-gamma - pos_score);
    let pos_coeff = -sigmoid(-gamma - pos_score);
    buffer.add_entity(positive.head, pos_coeff, &pos_grad.d_head);
    buffer.add_relation(positive.relation, pos_coeff, &pos_grad.d_relation);
    buffer.add_entity(positive.tail, pos_coeff, &pos_grad.d_tail);

    for (&neg, &weight) in negatives.triples.iter().zip(weights) {
        params.check_ids(neg.head, neg.relation, neg.tail)?;
        let (neg_score, neg_grad) = score_and_gradient_rows(
            kind,
            norm,
            params.entity_table().row(neg.head),
            params.relation_table().row(neg.relation),
            params.entity_table().row(neg.tail),
        );
        check_finite(neg_score, neg)?;
        loss += weight * softplus(gamma + neg_score);
        let coeff = weight * sigmoid(gamma + neg_score);
        buffer.add_entity(neg.head, coeff, &neg_grad.d_head);
        buffer.add_relation(neg.relation, coeff, &neg_grad.d_relation);
        buffer.add_entity(neg.tail, coeff, &neg_grad.d_tail);
    }

    // L2 regularization on the positive triple's own three embeddings.
    if lambda > 0.0 {
        let h = params.entity_table().row(positive.head);
        let r = params.relation_table().row(positive.relation);
        let t = params.entity_table().row(positive.tail);
        loss += lambda
            * (h.iter().map(|v| v * v).sum::<f64>()
                + r.iter().map(|v| v * v).sum::<f64>()
                + t.iter().map(|v| v * v).sum::<f64>());
        buffer.add_entity(positive.head, 2.0 * lambda, h);
        buffer.add_relation(positive.relation, 2.0 * lambda, r);
        buffer.add_entity(positive.tail, 2.0 * lambda, t);
    }

    Ok((loss, buffer))
}

/// N3 norm `sum_i |x_i|^3` of a row (elementwise complex modulus for the
/// complex layout) and its gradient added into `grad`.
fn n3_norm_and_grad(row: &[f64], complex: bool, lambda: f64, grad: &mut [f64]) -> f64 {
    let mut norm = 0.0;
    if complex {
        let m = row.len() / 2;
        for i in 0..m {
            let (a, b) = (row[i], row[m + i]);
            let modulus = (a * a + b * b).sqrt();
            norm += modulus.powi(3);
            grad[i] += 3.0 * lambda * modulus * a;
            grad[m + i] += 3.0 * lambda * modulus * b;
        }
    } else {
        for (i, &x) in row.iter().enumerate() {
            norm += x.abs().powi(3);
            grad[i] += 3.0 * lambda * x.abs() * x;
        }
    }
    norm
}

/// Multiclass log-loss over all head and all tail replacements, with N3
/// regularization. Only defined for the bilinear N3 kinds.
pub fn multiclass_n3_loss(
    params: &ModelParams,
    positive: Triple,
    config: &TrainConfig,
) -> Result<(f64, GradientBuffer)> {
    let kind = params.kind();
    if !kind.is_n3() {
        return Err(Error::LossKindMismatch {
            loss: "multiclass-n3".into(),
            kind: kind.name().into(),
        });
    }
    params.check_ids(positive.head, positive.relation, positive.tail)?;
    let entities = params.entity_count();
    let d = params.embedding_size();
    let lambda = config.lambda;
    let norm = params.norm();

    let h_row = params.entity_table().row(positive.head);
    let r_row = params.relation_table().row(positive.relation);
    let t_row = params.entity_table().row(positive.tail);

    let mut buffer = GradientBuffer::new();
    let mut loss = 0.0;

    // One pass per side; the score is linear in the replaced argument, so a
    // single factor vector scores every candidate and the softmax residual
    // folds into one weighted embedding sum for the r/t (or h/r) gradients.
    for side in [CorruptionSide::Head, CorruptionSide::Tail] {
        let factor = match side {
            CorruptionSide::Head => head_factor(kind, r_row, t_row),
            CorruptionSide::Tail => tail_factor(kind, h_row, r_row),
        };
        let target = match side {
            CorruptionSide::Head => positive.head,
            CorruptionSide::Tail => positive.tail,
        };
        let mut scores = Vec::with_capacity(entities);
        let mut max = f64::NEG_INFINITY;
        for e in 0..entities {
            let s = dot(params.entity_table().row(e), &factor);
            if !s.is_finite() {
                return Err(Error::non_finite(positive, None));
            }
            max = max.max(s);
            scores.push(s);
        }
        let mut exp_sum = 0.0;
        for s in &scores {
            exp_sum += (s - max).exp();
        }
        loss += max + exp_sum.ln() - scores[target];

        // Residual-weighted sum of entity rows, reused for the fixed-slot
        // gradients via the score's multilinearity.
        let mut weighted = vec![0.0; d];
        for e in 0..entities {
            let coeff = (scores[e] - max).exp() / exp_sum - if e == target { 1.0 } else { 0.0 };
            buffer.add_entity(e, coeff, &factor);
            let row = params.entity_table().row(e);
            for (w, v) in weighted.iter_mut().zip(row) {
                *w += coeff * v;
            }
        }
        match side {
            CorruptionSide::Head => {
                let (_, g) = score_and_gradient_rows(kind, norm, &weighted, r_row, t_row);
                buffer.add_relation(positive.relation, 1.0, &g.d_relation);
                buffer.add_entity(positive.tail, 1.0, &g.d_tail);
            }
            CorruptionSide::Tail => {
                let (_, g) = score_and_gradient_rows(kind, norm, h_row, r_row, &weighted);
                buffer.add_entity(positive.head, 1.0, &g.d_head);
                buffer.add_relation(positive.relation, 1.0, &g.d_relation);
            }
        }
    }

    if lambda > 0.0 {
        let complex = kind.is_complex();
        let mut gh = vec![0.0; d];
        let mut gr = vec![0.0; params.relation_width()];
        let mut gt = vec![0.0; d];
        let reg = n3_norm_and_grad(h_row, complex, lambda, &mut gh)
            + n3_norm_and_grad(r_row, complex, lambda, &mut gr)
            + n3_norm_and_grad(t_row, complex, lambda, &mut gt);
        loss += lambda * reg;
        buffer.add_entity(positive.head, 1.0, &gh);
        buffer.add_relation(positive.relation, 1.0, &gr);
        buffer.add_entity(positive.tail, 1.0, &gt);
    }

    check_finite(loss, positive)?;
    Ok((loss, buffer))
}
