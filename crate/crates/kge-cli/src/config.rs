//! Flat key=value config files. Precedence: flags override file values,
//! file values override built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};

use crate::UsageError;

/// Parsed config file contents.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(UsageError(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    line_no + 1
                ))
                .into());
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Typed lookup; parse failures are usage errors naming the key.
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                UsageError(format!("config key {key}: cannot parse value {raw:?}")).into()
            }),
        }
    }
}

/// `flag` beats `file` beats `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// As [`pick`] without a default; errors when the setting is absent.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| UsageError(format!("missing required setting --{name}")).into())
}
