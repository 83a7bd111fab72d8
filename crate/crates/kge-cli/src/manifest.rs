//! Run manifests: every output directory carries the fully resolved
//! configuration, tool version and timestamps, enough to reproduce the run.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub created_utc: String,
    /// Every setting, fully resolved (defaults made explicit).
    pub resolved: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, resolved: BTreeMap<String, String>) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            resolved,
        }
    }

    /// Writes manifest.json plus config.conf, a key=value file loadable
    /// with --config to repeat the run.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), json)
            .with_context(|| format!("writing manifest under {}", dir.display()))?;
        let mut conf = String::new();
        for (key, value) in &self.resolved {
            conf.push_str(key);
            conf.push('=');
            conf.push_str(value);
            conf.push('\n');
        }
        std::fs::write(dir.join("config.conf"), conf)?;
        Ok(())
    }
}
