//! `kge eval`: filtered link-prediction metrics for one checkpoint, or
//! mean/std aggregation over several seed-varied checkpoints.

use anyhow::Result;
use serde::Serialize;

use kge_core::data::{load_dataset, FilterIndex};
use kge_core::ensemble::load_checkpoint;
use kge_core::evaluation::{aggregate_runs, evaluate_model, MetricsReport, RepeatedRunReport};

use crate::config::{pick, require, FileConfig};
use crate::manifest::RunManifest;
use crate::{csv, EvalArgs, UsageError};

#[derive(Serialize)]
struct EvalOutput {
    model: String,
    kind: String,
    d_l: usize,
    k: usize,
    seed_count: usize,
    aggregate: RepeatedRunReport,
    /// Full per-run reports (per-triple ranks included for single runs).
    runs: Vec<MetricsReport>,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let dataset_dir = require(
        args.dataset,
        file.raw("dataset").map(std::path::PathBuf::from),
        "dataset",
    )?;
    let out = pick(
        args.out,
        file.raw("out").map(std::path::PathBuf::from),
        std::path::PathBuf::from("kge-eval"),
    );

    let dataset = load_dataset(&dataset_dir)?;
    let filter = FilterIndex::build(&dataset);

    let mut reports = Vec::new();
    let mut shape: Option<(String, usize, usize)> = None;
    for path in &args.checkpoints {
        let (model, meta) = load_checkpoint(path)?;
        meta.verify_vocabulary(&dataset)?;
        let this = (meta.kind.name().to_string(), meta.d_l, meta.k);
        match &shape {
            None => shape = Some(this),
            Some(expected) if *expected != this => {
                return Err(UsageError(format!(
                    "checkpoint {} is {} d_l={} k={}, but earlier checkpoints are {} d_l={} k={}",
                    path.display(),
                    this.0,
                    this.1,
                    this.2,
                    expected.0,
                    expected.1,
                    expected.2
                ))
                .into());
            }
            _ => {}
        }
        let report = evaluate_model(&model, &dataset, &filter)?;
        log::info!(
            "{}: MRR {:.4}, Hits@1 {:.4}, Hits@3 {:.4}, Hits@10 {:.4}",
            path.display(),
            report.mrr,
            report.hits_at(1),
            report.hits_at(3),
            report.hits_at(10)
        );
        reports.push(report);
    }

    let (kind_name, d_l, k) = shape.expect("at least one checkpoint");
    let display_name = if k == 1 {
        kind_name.clone()
    } else {
        format!("M{kind_name}")
    };
    let aggregate = aggregate_runs(&reports)?;

    // Per-triple ranks stay only in single-run output; aggregated output
    // keeps the per-run summaries light.
    let runs = if reports.len() == 1 {
        reports
    } else {
        reports.iter().map(MetricsReport::summary).collect()
    };
    let output = EvalOutput {
        model: display_name.clone(),
        kind: kind_name,
        d_l,
        k,
        seed_count: runs.len(),
        aggregate,
        runs,
    };

    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&output)?,
    )?;

    let mut summary = String::from(
        "model,kind,d_l,k,seed_count,mrr_mean,mrr_std,hits1_mean,hits1_std,hits3_mean,hits3_std,hits10_mean,hits10_std\n",
    );
    let agg = &output.aggregate;
    summary.push_str(&csv::line(&[
        output.model.clone(),
        output.kind.clone(),
        output.d_l.to_string(),
        output.k.to_string(),
        output.seed_count.to_string(),
        agg.mrr.mean.to_string(),
        agg.mrr.std.to_string(),
        agg.hits[&1].mean.to_string(),
        agg.hits[&1].std.to_string(),
        agg.hits[&3].mean.to_string(),
        agg.hits[&3].std.to_string(),
        agg.hits[&10].mean.to_string(),
        agg.hits[&10].std.to_string(),
    ]));
    std::fs::write(out.join("summary.csv"), summary)?;

    let manifest = RunManifest::new(
        "eval",
        super::settings([
            ("dataset", dataset_dir.display().to_string()),
            ("out", out.display().to_string()),
            (
                "checkpoints",
                args.checkpoints
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
        ]),
    );
    manifest.write(&out)?;
    println!(
        "{}: MRR {:.4} +/- {:.4} over {} run(s)",
        display_name, output.aggregate.mrr.mean, output.aggregate.mrr.std, output.seed_count
    );
    Ok(())
}
