//! `kge synth`: synthetic dataset generation in triple TSV format.

use anyhow::Result;

use kge_core::data::{generate_synthetic, Pattern, SyntheticSpec};

use crate::config::{pick, require, FileConfig};
use crate::manifest::RunManifest;
use crate::{SynthArgs, UsageError};

pub fn run(args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let pattern_name = require(args.pattern, file.raw("pattern").map(String::from), "pattern")?;
    let pattern = Pattern::parse(&pattern_name).ok_or_else(|| {
        UsageError(format!(
            "unknown pattern {pattern_name:?}; expected symmetric, 1-n, n-1, n-n or mixed"
        ))
    })?;
    let entities = pick(args.entities, file.get("entities")?, 200);
    let pairs = pick(args.pairs, file.get("pairs")?, 200);
    let fan = pick(args.fan, file.get("fan")?, 3);
    let seed = pick(args.seed, file.get("seed")?, 1);
    let out = pick(
        args.out,
        file.raw("out").map(std::path::PathBuf::from),
        std::path::PathBuf::from("kge-synth"),
    );

    let spec = SyntheticSpec {
        pattern,
        entities,
        count: pairs,
        fan,
        split_fractions: (0.8, 0.1, 0.1),
    };
    let dataset = generate_synthetic(&spec, seed)?;
    dataset.write_tsv(&out)?;
    log::info!(
        "wrote {} ({} entities, {} relations, {}/{}/{} triples)",
        out.display(),
        dataset.entity_count(),
        dataset.relation_count(),
        dataset.train.len(),
        dataset.valid.len(),
        dataset.test.len()
    );

    let manifest = RunManifest::new(
        "synth",
        super::settings([
            ("pattern", pattern_name.clone()),
            ("entities", entities.to_string()),
            ("pairs", pairs.to_string()),
            ("fan", fan.to_string()),
            ("seed", seed.to_string()),
            ("out", out.display().to_string()),
        ]),
    );
    manifest.write(&out)?;
    Ok(())
}
