//! Run manifest: config hash, seed and artifact inventory for reproducing a
//! batch invocation. The manifest is the only output carrying a timestamp;
//! all numeric artifacts are byte-deterministic.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(command: &'static str, config_path: &Path, config_hash: &str, seed: u64) -> Self {
        Self {
            tool: "adptrack",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_path: config_path.display().to_string(),
            config_sha256: config_hash.to_string(),
            seed,
            artifacts: Vec::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn record(&mut self, artifact: &str) {
        self.artifacts.push(artifact.to_string());
    }

    pub fn write(&mut self, out_dir: &Path) -> Result<()> {
        self.artifacts.push("manifest.json".to_string());
        let path = out_dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
