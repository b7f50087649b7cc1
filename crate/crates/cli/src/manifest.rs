//! Per-run manifest: resolved configuration, seeds and file digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use zeroshot::dataset::RNG_NAME;

use crate::config::RunConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub rng: &'static str,
    pub config: RunConfig,
    pub config_digest: String,
    /// Set when the run trains without the semantic module's loss and
    /// without feedback, which reduces it to the baseline network.
    pub lfgaa_equivalent: bool,
    pub inputs: BTreeMap<String, FileRecord>,
    pub outputs: BTreeMap<String, FileRecord>,
    pub results: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> anyhow::Result<Self> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            rng: RNG_NAME,
            config: config.clone(),
            config_digest: crate::config::digest(config)?,
            lfgaa_equivalent: config.train.is_lfgaa_equivalent(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            results: BTreeMap::new(),
            warnings: Vec::new(),
            timestamp: unix_now(),
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(role.to_string(), record(path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.outputs.insert(role.to_string(), record(path)?);
        Ok(())
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) -> anyhow::Result<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
    }
}

fn record(path: &Path) -> anyhow::Result<FileRecord> {
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: file_digest(path)?,
    })
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
