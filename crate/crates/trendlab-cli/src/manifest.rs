//! Per-stage run manifests.
//!
//! Every stage writes `<primary_output>.manifest.json` recording its
//! inputs, the effective configuration and its hash, the crate version,
//! and the seed when randomness was involved. The timestamp is the only
//! field allowed to differ between identical runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub timestamp: String,
    pub inputs: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_algorithm: Option<String>,
}

impl Manifest {
    pub fn new(command: &str, inputs: Vec<String>, config: BTreeMap<String, String>) -> Self {
        let mut hasher = Sha256::new();
        for (k, v) in &config {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let config_hash = format!("sha256:{:x}", hasher.finalize());
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            inputs,
            config,
            config_hash,
            seed: None,
            rng_algorithm: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.rng_algorithm = Some(trendlab::synthetic::RNG_ALGORITHM.to_string());
        self
    }

    /// Writes the manifest next to the stage's primary output.
    pub fn write_for(&self, primary_output: &Path) -> std::io::Result<()> {
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
    }
}

/// Key/value view of clap arguments for the manifest.
pub fn config_map(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}
