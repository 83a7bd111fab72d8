//! `kge analyze`: relation categorization, symmetric-rule mining, and the
//! per-category metrics table when a checkpoint is given.

use anyhow::Result;

use kge_core::data::{load_dataset, FilterIndex};
use kge_core::ensemble::load_checkpoint;
use kge_core::evaluation::evaluate_model;
use kge_core::patterns::{
    categorize_relations, mine_symmetric, per_category_report, DEFAULT_CATEGORY_THRESHOLD,
};

use crate::config::{pick, require, FileConfig};
use crate::manifest::RunManifest;
use crate::{csv, AnalyzeArgs};

/// Smallest pair count a mined rule must cover.
const MIN_RULE_SUPPORT: usize = 10;

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let dataset_dir = require(
        args.dataset,
        file.raw("dataset").map(std::path::PathBuf::from),
        "dataset",
    )?;
    let out = pick(
        args.out,
        file.raw("out").map(std::path::PathBuf::from),
        std::path::PathBuf::from("kge-analysis"),
    );
    let sym_threshold = pick(args.sym_threshold, file.get("sym-threshold")?, 0.8);
    let cat_threshold = pick(
        args.cat_threshold,
        file.get("cat-threshold")?,
        DEFAULT_CATEGORY_THRESHOLD,
    );
    let checkpoint = args.checkpoint.or(file.raw("checkpoint").map(Into::into));

    let dataset = load_dataset(&dataset_dir)?;
    let categories = categorize_relations(&dataset.train, cat_threshold);
    let rules = mine_symmetric(&dataset.train, sym_threshold, MIN_RULE_SUPPORT);

    std::fs::create_dir_all(&out)?;

    let name_of = |relation: usize| {
        dataset
            .vocabulary
            .relation_name(relation)
            .unwrap_or("?")
            .to_string()
    };

    let mut categories_csv =
        String::from("relation,category,avg_tails_per_head,avg_heads_per_tail\n");
    for cat in &categories {
        categories_csv.push_str(&csv::line(&[
            name_of(cat.relation),
            cat.category.label().to_string(),
            cat.tails_per_head.to_string(),
            cat.heads_per_tail.to_string(),
        ]));
    }
    std::fs::write(out.join("categories.csv"), categories_csv)?;

    let mut rules_csv = String::from("relation,support,confidence\n");
    for rule in &rules {
        rules_csv.push_str(&csv::line(&[
            name_of(rule.relation),
            rule.support.to_string(),
            rule.confidence.to_string(),
        ]));
    }
    std::fs::write(out.join("rules.csv"), rules_csv)?;
    log::info!(
        "{} relations categorized, {} symmetric rules at threshold {}",
        categories.len(),
        rules.len(),
        sym_threshold
    );

    if let Some(checkpoint_path) = &checkpoint {
        let (model, meta) = load_checkpoint(checkpoint_path)?;
        meta.verify_vocabulary(&dataset)?;
        let filter = FilterIndex::build(&dataset);
        let report = evaluate_model(&model, &dataset, &filter)?;
        let rows = per_category_report(&report.ranks, &categories, &rules);
        let mut breakdown = String::from("category,test_triples,mrr,hits1,hits3,hits10\n");
        for row in &rows {
            let (mrr, h1, h3, h10) = match &row.metrics {
                Some(m) => (
                    m.mrr.to_string(),
                    m.hits_at(1).to_string(),
                    m.hits_at(3).to_string(),
                    m.hits_at(10).to_string(),
                ),
                None => Default::default(),
            };
            breakdown.push_str(&csv::line(&[
                row.label.clone(),
                row.test_triples.to_string(),
                mrr,
                h1,
                h3,
                h10,
            ]));
        }
        std::fs::write(out.join("breakdown.csv"), breakdown)?;
    }

    let manifest = RunManifest::new(
        "analyze",
        super::settings([
            ("dataset", dataset_dir.display().to_string()),
            ("out", out.display().to_string()),
            ("sym-threshold", sym_threshold.to_string()),
            ("cat-threshold", cat_threshold.to_string()),
            (
                "checkpoint",
                checkpoint
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
        ]),
    );
    manifest.write(&out)?;
    Ok(())
}
