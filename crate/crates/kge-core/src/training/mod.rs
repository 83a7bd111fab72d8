//! Training of a single replica: negative sampling, losses, optimizers and
//! the epoch/early-stop driver.

mod loss;
mod negative;
mod optimizer;

pub use loss::{
    binary_logistic_loss, binary_logistic_loss_weighted, multiclass_n3_loss, GradientBuffer,
};
pub use negative::{adversarial_weights, sample_negatives, CorruptionSide, NegativeBatch};
pub use optimizer::{OptimizerKind, OptimizerState};

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, FilterIndex};
use crate::embedding::{ModelKind, ModelParams, Norm};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_split;

/// Which loss drives the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    BinaryLogistic,
    MulticlassN3,
}

impl LossKind {
    pub fn parse(name: &str) -> Option<LossKind> {
        match name.to_ascii_lowercase().as_str() {
            "binary-logistic" | "binary" => Some(LossKind::BinaryLogistic),
            "multiclass-n3" | "multiclass" => Some(LossKind::MulticlassN3),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::BinaryLogistic => "binary-logistic",
            LossKind::MulticlassN3 => "multiclass-n3",
        }
    }
}

/// Full hyperparameter set for training one replica.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// Margin of the distance-based models.
    pub gamma: f64,
    /// Negatives per positive, per corruption side.
    pub eta: usize,
    /// Regularization coefficient (L2 for binary, N3 for multiclass).
    pub lambda: f64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// The training split is divided into this many near-equal batches per
    /// epoch under the binary loss.
    pub batches_per_epoch: usize,
    /// Fixed batch size under the multiclass loss.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Validate every this many epochs.
    pub valid_every: usize,
    /// Stop after this many consecutive non-improving validations.
    pub patience: usize,
    /// TransE norm order.
    pub norm: Norm,
    /// Base random seed; replica j trains with `seed + j`.
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults per model kind: Adam at lr 3e-4 with the binary logistic
    /// loss for TransE/RotatE/DistMult/ComplEx, Adagrad at lr 0.1 with the
    /// multiclass N3 loss for the N3 variants.
    pub fn for_kind(kind: ModelKind) -> TrainConfig {
        if kind.is_n3() {
            TrainConfig {
                loss: LossKind::MulticlassN3,
                gamma: 0.0,
                eta: 1,
                lambda: 0.01,
                optimizer: OptimizerKind::Adagrad,
                lr: 0.1,
                batches_per_epoch: 100,
                batch_size: 100,
                max_epochs: 5000,
                valid_every: 50,
                patience: 3,
                norm: Norm::L2,
                seed: 0,
            }
        } else {
            TrainConfig {
                loss: LossKind::BinaryLogistic,
                gamma: 10.0,
                eta: 8,
                lambda: 0.0,
                optimizer: OptimizerKind::Adam,
                lr: 3e-4,
                batches_per_epoch: 100,
                batch_size: 100,
                max_epochs: 5000,
                valid_every: 50,
                patience: 3,
                norm: Norm::L2,
                seed: 0,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.batches_per_epoch < 1 {
            return Err(Error::InvalidConfig("batches-per-epoch must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch-size must be >= 1".into()));
        }
        if self.patience < 1 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if self.valid_every < 1 {
            return Err(Error::InvalidConfig("valid-every must be >= 1".into()));
        }
        if self.eta < 1 {
            return Err(Error::InvalidConfig("eta must be >= 1".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidConfig("gamma must be >= 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        Ok(())
    }

    /// Stable digest of the full configuration, recorded in checkpoints.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("canonical json");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            write!(out, "{byte:02x}").unwrap();
        }
        out
    }
}

/// Near-equal partition of `n` items into at most `batches` batches; the
/// first `n % batches` batches take one extra item. Empty batches are
/// dropped.
pub fn partition_sizes(n: usize, batches: usize) -> Vec<usize> {
    let base = n / batches;
    let rem = n % batches;
    (0..batches)
        .map(|i| base + usize::from(i < rem))
        .filter(|&s| s > 0)
        .collect()
}

/// Loss and timing of one epoch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub triples_seen: usize,
    pub wall_seconds: f64,
}

/// One training pass over the shuffled training split.
///
/// Under the binary loss each positive consumes one corrupted-head and one
/// corrupted-tail negative batch of size `eta`; the per-positive loss is the
/// mean of the two sides, so the regularization term counts once. Under the
/// multiclass loss positives are consumed in fixed-size batches. One
/// optimizer step is taken per batch on the batch-mean gradient.
pub fn train_epoch(
    params: &mut ModelParams,
    opt_state: &mut OptimizerState,
    dataset: &Dataset,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpochStats> {
    let start = Instant::now();
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    order.shuffle(rng);

    let sizes = match config.loss {
        LossKind::BinaryLogistic => partition_sizes(order.len(), config.batches_per_epoch),
        LossKind::MulticlassN3 => {
            let full = order.len() / config.batch_size;
            let rem = order.len() % config.batch_size;
            let mut sizes = vec![config.batch_size; full];
            if rem > 0 {
                sizes.push(rem);
            }
            sizes
        }
    };

    let entities = dataset.entity_count();
    let mut loss_sum = 0.0;
    let mut cursor = 0usize;
    for batch_size in sizes {
        let batch = &order[cursor..cursor + batch_size];
        cursor += batch_size;
        let mut grads = GradientBuffer::new();
        let scale = 1.0 / batch_size as f64;
        for &idx in batch {
            let positive = dataset.train[idx];
            match config.loss {
                LossKind::BinaryLogistic => {
                    let head_batch = sample_negatives(
                        positive,
                        config.eta,
                        CorruptionSide::Head,
                        entities,
                        rng,
                    )?;
                    let tail_batch = sample_negatives(
                        positive,
                        config.eta,
                        CorruptionSide::Tail,
                        entities,
                        rng,
                    )?;
                    let (lh, gh) = binary_logistic_loss(params, positive, &head_batch, config)?;
                    let (lt, gt) = binary_logistic_loss(params, positive, &tail_batch, config)?;
                    loss_sum += 0.5 * (lh + lt);
                    grads.add_scaled(&gh, 0.5 * scale);
                    grads.add_scaled(&gt, 0.5 * scale);
                }
                LossKind::MulticlassN3 => {
                    let (l, g) = multiclass_n3_loss(params, positive, config)?;
                    loss_sum += l;
                    grads.add_scaled(&g, scale);
                }
            }
        }
        opt_state.step(params, &grads, config.lr)?;
    }

    Ok(EpochStats {
        mean_loss: if order.is_empty() {
            0.0
        } else {
            loss_sum / order.len() as f64
        },
        triples_seen: order.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Filtered MRR on the validation split, when this epoch validated.
    pub valid_mrr: Option<f64>,
    pub wall_seconds: f64,
}

/// Training history of one replica.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochRecord>,
    pub best_valid_mrr: Option<f64>,
    pub stopped_at_epoch: usize,
    /// Set when the validation split was empty and early stopping was
    /// disabled.
    pub early_stop_disabled: bool,
}

impl TrainingCurve {
    /// CSV rendition: epoch, mean-loss, valid-MRR (empty when not
    /// validated), wall-seconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,valid_mrr,wall_seconds\n");
        for rec in &self.epochs {
            let mrr = rec.valid_mrr.map(|m| m.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{}",
                rec.epoch, rec.mean_loss, mrr, rec.wall_seconds
            )
            .unwrap();
        }
        out
    }
}

/// Tracks best validation MRR and consecutive non-improvements.
#[derive(Debug, Clone)]
pub(crate) struct EarlyStopper {
    patience: usize,
    best: Option<f64>,
    bad_validations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopper {
    pub(crate) fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: None,
            bad_validations: 0,
        }
    }

    pub(crate) fn observe(&mut self, mrr: f64) -> StopDecision {
        if self.best.is_none_or(|b| mrr > b) {
            self.best = Some(mrr);
            self.bad_validations = 0;
            StopDecision::Improved
        } else {
            self.bad_validations += 1;
            if self.bad_validations >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

/// Trains until `max_epochs` or until `patience` consecutive validations
/// fail to improve the filtered MRR on the validation split; returns the
/// best-MRR snapshot. An empty validation split disables early stopping
/// with a warning and training runs to `max_epochs`.
pub fn train_with_early_stop(
    params: ModelParams,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainingCurve)> {
    let filter = FilterIndex::build(dataset);
    train_with_early_stop_filtered(params, dataset, config, &filter)
}

/// As [`train_with_early_stop`], with a prebuilt filter index (the index
/// covers all splits and can be shared between replicas).
pub fn train_with_early_stop_filtered(
    mut params: ModelParams,
    dataset: &Dataset,
    config: &TrainConfig,
    filter: &FilterIndex,
) -> Result<(ModelParams, TrainingCurve)> {
    config.validate()?;
    if config.loss == LossKind::MulticlassN3 && !params.kind().is_n3() {
        return Err(Error::LossKindMismatch {
            loss: config.loss.name().into(),
            kind: params.kind().name().into(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Separate stream from initialization, which consumed stream 0.
    rng.set_stream(1);

    let early_stop = !dataset.valid.is_empty();
    if !early_stop {
        log::warn!("validation split is empty; early stopping disabled, training to max-epochs");
    }
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best: Option<(f64, ModelParams)> = None;
    let mut opt_state = OptimizerState::new(config.optimizer, &params);
    let mut curve = TrainingCurve {
        early_stop_disabled: !early_stop,
        ..TrainingCurve::default()
    };

    for epoch in 1..=config.max_epochs {
        let stats = train_epoch(&mut params, &mut opt_state, dataset, config, &mut rng)
            .map_err(|e| attach_epoch(e, epoch))?;
        let mut record = EpochRecord {
            epoch,
            mean_loss: stats.mean_loss,
            valid_mrr: None,
            wall_seconds: stats.wall_seconds,
        };
        curve.stopped_at_epoch = epoch;

        if early_stop && epoch % config.valid_every == 0 {
            let report =
                evaluate_split(&params, &dataset.valid, filter, dataset.entity_count())?;
            record.valid_mrr = Some(report.mrr);
            match stopper.observe(report.mrr) {
                StopDecision::Improved => {
                    best = Some((report.mrr, params.clone()));
                    curve.epochs.push(record);
                }
                StopDecision::Continue => curve.epochs.push(record),
                StopDecision::Stop => {
                    curve.epochs.push(record);
                    break;
                }
            }
        } else {
            curve.epochs.push(record);
        }
    }

    if let Some((mrr, snapshot)) = best {
        curve.best_valid_mrr = Some(mrr);
        Ok((snapshot, curve))
    } else {
        Ok((params, curve))
    }
}

fn attach_epoch(err: Error, epoch: usize) -> Error {
    match err {
        Error::NonFiniteScore { h, r, t, .. } => Error::NonFiniteScore {
            h,
            r,
            t,
            epoch: Some(epoch),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_partition() {
        assert_eq!(partition_sizes(100, 100), vec![1; 100]);
    }

    #[test]
    fn remainder_spreads_over_leading_batches() {
        let sizes = partition_sizes(101, 100);
        assert_eq!(sizes.len(), 100);
        assert_eq!(sizes[0], 2);
        assert!(sizes[1..].iter().all(|&s| s == 1));
        assert_eq!(sizes.iter().sum::<usize>(), 101);
    }

    #[test]
    fn fewer_items_than_batches_drops_empties() {
        let sizes = partition_sizes(3, 10);
        assert_eq!(sizes, vec![1, 1, 1]);
    }

    #[test]
    fn early_stopper_patience_one() {
        let mut stopper = EarlyStopper::new(1);
        assert_eq!(stopper.observe(0.30), StopDecision::Improved);
        assert_eq!(stopper.observe(0.31), StopDecision::Improved);
        assert_eq!(stopper.observe(0.29), StopDecision::Stop);
    }

    #[test]
    fn early_stopper_counts_consecutive_failures() {
        let mut stopper = EarlyStopper::new(2);
        assert_eq!(stopper.observe(0.5), StopDecision::Improved);
        assert_eq!(stopper.observe(0.4), StopDecision::Continue);
        assert_eq!(stopper.observe(0.6), StopDecision::Improved);
        assert_eq!(stopper.observe(0.5), StopDecision::Continue);
        assert_eq!(stopper.observe(0.5), StopDecision::Stop);
    }

    #[test]
    fn config_digest_is_stable_and_sensitive() {
        let a = TrainConfig::for_kind(ModelKind::TransE);
        let b = TrainConfig::for_kind(ModelKind::TransE);
        assert_eq!(a.digest(), b.digest());
        let mut c = TrainConfig::for_kind(ModelKind::TransE);
        c.lr = 0.001;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = TrainConfig::for_kind(ModelKind::TransE);
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::for_kind(ModelKind::TransE);
        cfg.patience = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::for_kind(ModelKind::TransE);
        cfg.batches_per_epoch = 0;
        assert!(cfg.validate().is_err());
    }
}
