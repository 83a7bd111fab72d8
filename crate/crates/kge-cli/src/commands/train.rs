//! `kge train`: k-replica ensemble training with repeated-run support.

use anyhow::Result;

use kge_core::data::load_dataset;
use kge_core::ensemble::{save_checkpoint, train_ensemble};
use kge_core::training::{LossKind, OptimizerKind, TrainConfig};
use kge_core::embedding::Norm;
use kge_core::ModelKind;

use crate::config::{pick, require, FileConfig};
use crate::manifest::RunManifest;
use crate::{TrainArgs, UsageError};

pub fn run(args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;

    let model_name = require(args.model, file.raw("model").map(String::from), "model")?;
    let kind = ModelKind::parse(&model_name)
        .ok_or_else(|| UsageError(format!("unknown model kind {model_name:?}")))?;
    let dataset_dir = require(
        args.dataset,
        file.raw("dataset").map(std::path::PathBuf::from),
        "dataset",
    )?;

    let dim = pick(args.dim, file.get("dim")?, 200);
    let k = pick(args.k, file.get("k")?, 1);
    let workers = pick(args.workers, file.get("workers")?, 1);
    let seed = pick(args.seed, file.get("seed")?, 1);
    let runs = pick(args.runs, file.get("runs")?, 1);
    let out = pick(
        args.out,
        file.raw("out").map(std::path::PathBuf::from),
        std::path::PathBuf::from("kge-run"),
    );

    if k < 1 || runs < 1 || workers < 1 {
        return Err(UsageError("k, runs and workers must all be >= 1".into()).into());
    }
    kind.check_width(dim)?;

    let defaults = TrainConfig::for_kind(kind);
    let optimizer_name = pick(
        args.optimizer,
        file.raw("optimizer").map(String::from),
        defaults.optimizer.name().to_string(),
    );
    let optimizer = OptimizerKind::parse(&optimizer_name)
        .ok_or_else(|| UsageError(format!("unknown optimizer {optimizer_name:?}")))?;
    let norm_order = pick(args.norm, file.get("norm")?, defaults.norm.order());
    let norm = Norm::parse(norm_order)
        .ok_or_else(|| UsageError(format!("norm must be 1 or 2, got {norm_order}")))?;

    let config = TrainConfig {
        loss: if kind.is_n3() {
            LossKind::MulticlassN3
        } else {
            LossKind::BinaryLogistic
        },
        gamma: pick(args.gamma, file.get("gamma")?, defaults.gamma),
        eta: pick(args.eta, file.get("eta")?, defaults.eta),
        lambda: pick(args.lambda, file.get("lambda")?, defaults.lambda),
        optimizer,
        lr: pick(args.lr, file.get("lr")?, defaults.lr),
        batches_per_epoch: pick(args.batches, file.get("batches")?, defaults.batches_per_epoch),
        batch_size: pick(args.batch_size, file.get("batch-size")?, defaults.batch_size),
        max_epochs: pick(args.max_epochs, file.get("max-epochs")?, defaults.max_epochs),
        valid_every: pick(args.valid_every, file.get("valid-every")?, defaults.valid_every),
        patience: pick(args.patience, file.get("patience")?, defaults.patience),
        norm,
        seed,
    };
    config.validate()?;

    let dataset = load_dataset(&dataset_dir)?;
    let vocab_hash = dataset.vocabulary.content_hash();
    std::fs::create_dir_all(&out)?;

    // Worker cap from the environment applies on top of the flag.
    let workers = crate::thread_cap().map_or(workers, |cap| workers.min(cap));

    for run in 0..runs {
        let mut run_config = config.clone();
        // Disjoint replica seed ranges across repeated runs.
        run_config.seed = seed + (run * k) as u64;
        let (model, curves) = train_ensemble(kind, k, dim, &dataset, &run_config, workers)?;
        let checkpoint_path = out.join(format!("run-{run}.kgee"));
        save_checkpoint(&model, &run_config.digest(), &vocab_hash, &checkpoint_path)?;
        for (j, curve) in curves.iter().enumerate() {
            std::fs::write(out.join(format!("run-{run}-replica-{j}.curve.csv")), curve.to_csv())?;
        }
        log::info!(
            "run {run}: {} k={k} d_l={dim} (overall d={}) -> {}",
            kind.name(),
            model.overall_size(),
            checkpoint_path.display()
        );
    }

    let manifest = RunManifest::new(
        "train",
        super::settings([
            ("model", model_name.to_ascii_lowercase()),
            ("dataset", dataset_dir.display().to_string()),
            ("out", out.display().to_string()),
            ("dim", dim.to_string()),
            ("k", k.to_string()),
            ("workers", workers.to_string()),
            ("seed", seed.to_string()),
            ("runs", runs.to_string()),
            ("lr", config.lr.to_string()),
            ("optimizer", config.optimizer.name().to_string()),
            ("batches", config.batches_per_epoch.to_string()),
            ("batch-size", config.batch_size.to_string()),
            ("eta", config.eta.to_string()),
            ("gamma", config.gamma.to_string()),
            ("lambda", config.lambda.to_string()),
            ("norm", config.norm.order().to_string()),
            ("max-epochs", config.max_epochs.to_string()),
            ("valid-every", config.valid_every.to_string()),
            ("patience", config.patience.to_string()),
        ]),
    );
    manifest.write(&out)?;
    Ok(())
}
