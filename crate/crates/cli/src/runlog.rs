//! Append-only JSON-lines log of every command run against an output
//! directory.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::pipeline::{Outcome, RUN_LOG};

pub const VERSION: &str = env!("SELFINTRO_GIT_DESCRIBE");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Path relative to the output directory, mapped to its sha256.
    pub artifacts: Map<String, Value>,
    pub metrics: Map<String, Value>,
    pub config: Value,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn append(config: &RunConfig, command: &str, outcome: &Outcome) -> Result<LogEntry> {
    let dir = &config.output_dir;
    let mut artifacts = Map::new();
    for path in &outcome.artifacts {
        let key = path
            .strip_prefix(dir)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        artifacts.insert(key, Value::String(file_sha256(path)?));
    }
    let entry = LogEntry {
        command: command.to_string(),
        version: VERSION.to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        artifacts,
        metrics: outcome.metrics.clone(),
        config: serde_json::to_value(config)?,
    };
    let path = dir.join(RUN_LOG);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    writeln!(f, "{}", serde_json::to_string(&entry)?)?;
    Ok(entry)
}

pub fn read(dir: &Path) -> Result<Vec<LogEntry>> {
    let path = dir.join(RUN_LOG);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
