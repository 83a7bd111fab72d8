pub mod analyze;
pub mod eval;
pub mod synth;
pub mod train;

use std::collections::BTreeMap;

/// Shorthand for building the resolved-settings map of a manifest.
pub fn settings<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}
