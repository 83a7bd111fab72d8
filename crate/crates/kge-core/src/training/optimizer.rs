//! Sparse Adam and Adagrad over embedding tables.
//!
//! Updates touch only the rows present in the gradient buffer. Adam moment
//! decay is applied lazily: a row's moments decay once per touch, and bias
//! correction uses the row's own touch count, so results differ from dense
//! Adam on rows absent from a batch.

use crate::embedding::ModelParams;
use crate::error::{Error, Result};

use super::loss::GradientBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OptimizerKind {
    Adam,
    Adagrad,
}

impl OptimizerKind {
    pub fn parse(name: &str) -> Option<OptimizerKind> {
        match name.to_ascii_lowercase().as_str() {
            "adam" => Some(OptimizerKind::Adam),
            "adagrad" => Some(OptimizerKind::Adagrad),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Adagrad => "adagrad",
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
enum State {
    Adam {
        m_entity: Vec<f64>,
        v_entity: Vec<f64>,
        m_relation: Vec<f64>,
        v_relation: Vec<f64>,
        touches_entity: Vec<u64>,
        touches_relation: Vec<u64>,
    },
    Adagrad {
        acc_entity: Vec<f64>,
        acc_relation: Vec<f64>,
    },
}

/// Per-parameter optimizer state matching one model's tables.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    state: State,
    entity_width: usize,
    relation_width: usize,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ModelParams) -> Self {
        let e = params.entity_table().values().len();
        let r = params.relation_table().values().len();
        let state = match kind {
            OptimizerKind::Adam => State::Adam {
                m_entity: vec![0.0; e],
                v_entity: vec![0.0; e],
                m_relation: vec![0.0; r],
                v_relation: vec![0.0; r],
                touches_entity: vec![0; params.entity_count()],
                touches_relation: vec![0; params.relation_count()],
            },
            OptimizerKind::Adagrad => State::Adagrad {
                acc_entity: vec![0.0; e],
                acc_relation: vec![0.0; r],
            },
        };
        OptimizerState {
            state,
            entity_width: params.embedding_size(),
            relation_width: params.relation_width(),
            step: 0,
        }
    }

    /// Total number of `step` calls so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated batch gradients. Rows are
    /// independent, so the result does not depend on iteration order.
    pub fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &GradientBuffer,
        lr: f64,
    ) -> Result<()> {
        for (row, grad) in grads.entity_rows() {
            if grad.len() != self.entity_width {
                return Err(Error::DimensionMismatch {
                    expected: self.entity_width,
                    got: grad.len(),
                    context: format!("entity gradient row {row}"),
                });
            }
            if row >= params.entity_count() {
                return Err(Error::EntityOutOfBounds {
                    id: row,
                    count: params.entity_count(),
                });
            }
            let width = self.entity_width;
            let values = params.entity_table_mut().row_mut(row);
            match &mut self.state {
                State::Adam {
                    m_entity,
                    v_entity,
                    touches_entity,
                    ..
                } => {
                    touches_entity[row] += 1;
                    adam_row(
                        values,
                        grad,
                        &mut m_entity[row * width..(row + 1) * width],
                        &mut v_entity[row * width..(row + 1) * width],
                        touches_entity[row],
                        lr,
                    );
                }
                State::Adagrad { acc_entity, .. } => {
                    adagrad_row(
                        values,
                        grad,
                        &mut acc_entity[row * width..(row + 1) * width],
                        lr,
                    );
                }
            }
        }
        for (row, grad) in grads.relation_rows() {
            if grad.len() != self.relation_width {
                return Err(Error::DimensionMismatch {
                    expected: self.relation_width,
                    got: grad.len(),
                    context: format!("relation gradient row {row}"),
                });
            }
            if row >= params.relation_count() {
                return Err(Error::RelationOutOfBounds {
                    id: row,
                    count: params.relation_count(),
                });
            }
            let width = self.relation_width;
            let values = params.relation_table_mut().row_mut(row);
            match &mut self.state {
                State::Adam {
                    m_relation,
                    v_relation,
                    touches_relation,
                    ..
                } => {
                    touches_relation[row] += 1;
                    adam_row(
                        values,
                        grad,
                        &mut m_relation[row * width..(row + 1) * width],
                        &mut v_relation[row * width..(row + 1) * width],
                        touches_relation[row],
                        lr,
                    );
                }
                State::Adagrad { acc_relation, .. } => {
                    adagrad_row(
                        values,
                        grad,
                        &mut acc_relation[row * width..(row + 1) * width],
                        lr,
                    );
                }
            }
        }
        self.step += 1;
        Ok(())
    }
}

fn adam_row(values: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], touch: u64, lr: f64) {
    let bias1 = 1.0 - ADAM_BETA1.powi(touch as i32);
    let bias2 = 1.0 - ADAM_BETA2.powi(touch as i32);
    for i in 0..values.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

fn adagrad_row(values: &mut [f64], grad: &[f64], acc: &mut [f64], lr: f64) {
    for i in 0..values.len() {
        acc[i] += grad[i] * grad[i];
        values[i] -= lr * grad[i] / (acc[i] + ADAGRAD_EPS).sqrt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingTable, ModelKind};

    fn one_cell_params() -> ModelParams {
        ModelParams::from_tables(
            ModelKind::DistMult,
            EmbeddingTable::zeros(2, 1).unwrap(),
            EmbeddingTable::zeros(1, 1).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn untouched_rows_stay_put() {
        let mut params = ModelParams::init(ModelKind::DistMult, 4, 2, 8, 5).unwrap();
        let before = params.entity_table().values().to_vec();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &params);
        let mut grads = GradientBuffer::new();
        grads.add_entity(1, 1.0, &[0.5; 8]);
        opt.step(&mut params, &grads, 1e-2).unwrap();
        // Row 1 moved, every other row is bit-identical.
        for row in [0usize, 2, 3] {
            assert_eq!(
                &params.entity_table().values()[row * 8..(row + 1) * 8],
                &before[row * 8..(row + 1) * 8]
            );
        }
        assert_ne!(&params.entity_table().values()[8..16], &before[8..16]);
    }

    #[test]
    fn zero_gradient_on_fresh_row_changes_nothing() {
        let mut params = ModelParams::init(ModelKind::DistMult, 4, 2, 8, 5).unwrap();
        let before = params.entity_table().values().to_vec();
        for kind in [OptimizerKind::Adam, OptimizerKind::Adagrad] {
            let mut opt = OptimizerState::new(kind, &params);
            let mut grads = GradientBuffer::new();
            grads.add_entity(0, 1.0, &[0.0; 8]);
            opt.step(&mut params, &grads, 1e-2).unwrap();
            assert_eq!(params.entity_table().values(), before.as_slice());
        }
    }

    #[test]
    fn adagrad_first_step_closed_form() {
        let mut params = one_cell_params();
        let mut opt = OptimizerState::new(OptimizerKind::Adagrad, &params);
        let mut grads = GradientBuffer::new();
        grads.add_entity(0, 1.0, &[3.0]);
        opt.step(&mut params, &grads, 0.1).unwrap();
        let expected = -0.1 * 3.0 / (9.0f64 + 1e-10).sqrt();
        assert!((params.entity_table().row(0)[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_constant_gradient_step_approaches_lr() {
        // With a constant gradient the bias-corrected moments converge to g
        // and g^2, so the per-step move tends to lr * sign(g).
        let mut params = one_cell_params();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &params);
        let lr = 0.01;
        let g = -2.5;
        let mut last = params.entity_table().row(0)[0];
        let mut step_size = 0.0;
        for _ in 0..500 {
            let mut grads = GradientBuffer::new();
            grads.add_entity(0, 1.0, &[g]);
            opt.step(&mut params, &grads, lr).unwrap();
            let now = params.entity_table().row(0)[0];
            step_size = now - last;
            last = now;
        }
        assert!(
            (step_size - lr).abs() < 1e-6,
            "step {step_size} should approach lr * sign(g) = {lr}"
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut params = ModelParams::init(ModelKind::DistMult, 4, 2, 8, 5).unwrap();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &params);
        let mut grads = GradientBuffer::new();
        grads.add_entity(0, 1.0, &[1.0; 4]);
        let err = opt.step(&mut params, &grads, 1e-2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
