//! Score functions for every model kind, plus their exact analytic
//! gradients with respect to the three embeddings involved.
//!
//! All scores follow the "higher is more plausible" convention:
//!
//! - TransE:   `-||h + r - t||_p`
//! - RotatE:   `-sum_i |h_i * e^(i theta_i) - t_i|` (modulus per coordinate)
//! - DistMult: `sum_i h_i r_i t_i`
//! - ComplEx:  `Re(sum_i h_i r_i conj(t_i))`
//!
//! The N3 variants share the DistMult/ComplEx scores. Subgradients at the
//! non-differentiable points of the distance models are taken as zero.

use crate::data::Triple;
use crate::embedding::{ModelKind, ModelParams, Norm};
use crate::error::Result;

/// Gradient of a score with respect to the head, relation and tail rows.
/// For RotatE the relation gradient is in phase space (length `d/2`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient {
    pub d_head: Vec<f64>,
    pub d_relation: Vec<f64>,
    pub d_tail: Vec<f64>,
}

/// Scores a triple under `params`, checking id bounds.
pub fn score(params: &ModelParams, triple: Triple) -> Result<f64> {
    params.check_ids(triple.head, triple.relation, triple.tail)?;
    Ok(score_unchecked(params, triple))
}

/// Scores a triple whose ids are already known to be in bounds.
pub fn score_unchecked(params: &ModelParams, triple: Triple) -> f64 {
    score_rows(
        params.kind(),
        params.norm(),
        params.entity_table().row(triple.head),
        params.relation_table().row(triple.relation),
        params.entity_table().row(triple.tail),
    )
}

/// Exact gradient of the score at the current embeddings.
pub fn score_gradient(params: &ModelParams, triple: Triple) -> Result<ScoreGradient> {
    params.check_ids(triple.head, triple.relation, triple.tail)?;
    let (_, grad) = score_and_gradient_rows(
        params.kind(),
        params.norm(),
        params.entity_table().row(triple.head),
        params.relation_table().row(triple.relation),
        params.entity_table().row(triple.tail),
    );
    Ok(grad)
}

pub(crate) fn score_rows(kind: ModelKind, norm: Norm, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    match kind {
        ModelKind::TransE => match norm {
            Norm::L2 => {
                let mut sum = 0.0;
                for i in 0..h.len() {
                    let v = h[i] + r[i] - t[i];
                    sum += v * v;
                }
                -sum.sqrt()
            }
            Norm::L1 => {
                let mut sum = 0.0;
                for i in 0..h.len() {
                    sum += (h[i] + r[i] - t[i]).abs();
                }
                -sum
            }
        },
        ModelKind::RotatE => {
            let m = h.len() / 2;
            let mut sum = 0.0;
            for i in 0..m {
                let (c, s) = (r[i].cos(), r[i].sin());
                let zr = h[i] * c - h[m + i] * s - t[i];
                let zi = h[i] * s + h[m + i] * c - t[m + i];
                sum += (zr * zr + zi * zi).sqrt();
            }
            -sum
        }
        ModelKind::DistMult | ModelKind::DistMultN3 => {
            let mut sum = 0.0;
            for i in 0..h.len() {
                sum += h[i] * r[i] * t[i];
            }
            sum
        }
        ModelKind::ComplEx | ModelKind::ComplExN3 => {
            let m = h.len() / 2;
            let mut sum = 0.0;
            for i in 0..m {
                let (hr, hi) = (h[i], h[m + i]);
                let (rr, ri) = (r[i], r[m + i]);
                let (tr, ti) = (t[i], t[m + i]);
                sum += (hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti;
            }
            sum
        }
    }
}

pub(crate) fn score_and_gradient_rows(
    kind: ModelKind,
    norm: Norm,
    h: &[f64],
    r: &[f64],
    t: &[f64],
) -> (f64, ScoreGradient) {
    let d = h.len();
    match kind {
        ModelKind::TransE => {
            let mut gh = vec![0.0; d];
            let mut gt = vec![0.0; d];
            match norm {
                Norm::L2 => {
                    let mut sum = 0.0;
                    for i in 0..d {
                        let v = h[i] + r[i] - t[i];
                        sum += v * v;
                    }
                    let n = sum.sqrt();
                    if n > 0.0 {
                        for i in 0..d {
                            let v = h[i] + r[i] - t[i];
                            gh[i] = -v / n;
                            gt[i] = v / n;
                        }
                    }
                    let gr = gh.clone();
                    (
                        -n,
                        ScoreGradient {
                            d_head: gh,
                            d_relation: gr,
                            d_tail: gt,
                        },
                    )
                }
                Norm::L1 => {
                    let mut sum = 0.0;
                    for i in 0..d {
                        let v = h[i] + r[i] - t[i];
                        sum += v.abs();
                        let s = if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        gh[i] = -s;
                        gt[i] = s;
                    }
                    let gr = gh.clone();
                    (
                        -sum,
                        ScoreGradient {
                            d_head: gh,
                            d_relation: gr,
                            d_tail: gt,
                        },
                    )
                }
            }
        }
        ModelKind::RotatE => {
            let m = d / 2;
            let mut gh = vec![0.0; d];
            let mut gr = vec![0.0; m];
            let mut gt = vec![0.0; d];
            let mut sum = 0.0;
            for i in 0..m {
                let (c, s) = (r[i].cos(), r[i].sin());
                let wr = h[i] * c - h[m + i] * s;
                let wi = h[i] * s + h[m + i] * c;
                let zr = wr - t[i];
                let zi = wi - t[m + i];
                let modulus = (zr * zr + zi * zi).sqrt();
                sum += modulus;
                if modulus > 0.0 {
                    let ur = zr / modulus;
                    let ui = zi / modulus;
                    gh[i] = -(ur * c + ui * s);
                    gh[m + i] = ur * s - ui * c;
                    // d(h * e^(i theta)) / d theta = i * h * e^(i theta)
                    gr[i] = ur * wi - ui * wr;
                    gt[i] = ur;
                    gt[m + i] = ui;
                }
            }
            (
                -sum,
                ScoreGradient {
                    d_head: gh,
                    d_relation: gr,
                    d_tail: gt,
                },
            )
        }
        ModelKind::DistMult | ModelKind::DistMultN3 => {
            let mut gh = vec![0.0; d];
            let mut gr = vec![0.0; d];
            let mut gt = vec![0.0; d];
            let mut sum = 0.0;
            for i in 0..d {
                sum += h[i] * r[i] * t[i];
                gh[i] = r[i] * t[i];
                gr[i] = h[i] * t[i];
                gt[i] = h[i] * r[i];
            }
            (
                sum,
                ScoreGradient {
                    d_head: gh,
                    d_relation: gr,
                    d_tail: gt,
                },
            )
        }
        ModelKind::ComplEx | ModelKind::ComplExN3 => {
            let m = d / 2;
            let mut gh = vec![0.0; d];
            let mut gr = vec![0.0; d];
            let mut gt = vec![0.0; d];
            let mut sum = 0.0;
            for i in 0..m {
                let (hr, hi) = (h[i], h[m + i]);
                let (rr, ri) = (r[i], r[m + i]);
                let (tr, ti) = (t[i], t[m + i]);
                sum += (hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti;
                gh[i] = rr * tr + ri * ti;
                gh[m + i] = -ri * tr + rr * ti;
                gr[i] = hr * tr + hi * ti;
                gr[m + i] = hr * ti - hi * tr;
                gt[i] = hr * rr - hi * ri;
                gt[m + i] = hr * ri + hi * rr;
            }
            (
                sum,
                ScoreGradient {
                    d_head: gh,
                    d_relation: gr,
                    d_tail: gt,
                },
            )
        }
    }
}

/// `df/dh` as a vector independent of the head row. Defined for the bilinear
/// kinds (DistMult/ComplEx families), where the score is linear in each
/// argument; used by the full-softmax loss to score and differentiate over
/// every candidate head with one factor.
pub(crate) fn head_factor(kind: ModelKind, r: &[f64], t: &[f64]) -> Vec<f64> {
    match kind {
        ModelKind::DistMult | ModelKind::DistMultN3 => {
            r.iter().zip(t).map(|(a, b)| a * b).collect()
        }
        ModelKind::ComplEx | ModelKind::ComplExN3 => {
            let m = t.len() / 2;
            let mut v = vec![0.0; t.len()];
            for i in 0..m {
                let (rr, ri) = (r[i], r[m + i]);
                let (tr, ti) = (t[i], t[m + i]);
                v[i] = rr * tr + ri * ti;
                v[m + i] = -ri * tr + rr * ti;
            }
            v
        }
        _ => unreachable!("head_factor is only defined for bilinear kinds"),
    }
}

/// `df/dt` as a vector independent of the tail row; see [`head_factor`].
pub(crate) fn tail_factor(kind: ModelKind, h: &[f64], r: &[f64]) -> Vec<f64> {
    match kind {
        ModelKind::DistMult | ModelKind::DistMultN3 => {
            h.iter().zip(r).map(|(a, b)| a * b).collect()
        }
        ModelKind::ComplEx | ModelKind::ComplExN3 => {
            let m = h.len() / 2;
            let mut v = vec![0.0; h.len()];
            for i in 0..m {
                let (hr, hi) = (h[i], h[m + i]);
                let (rr, ri) = (r[i], r[m + i]);
                v[i] = hr * rr - hi * ri;
                v[m + i] = hr * ri + hi * rr;
            }
            v
        }
        _ => unreachable!("tail_factor is only defined for bilinear kinds"),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
