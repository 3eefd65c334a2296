use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every report.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub master_seed: Option<u64>,
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_owned(),
            parameters,
            master_seed: None,
            input_digests: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = Some(seed);
        self
    }

    pub fn digest(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let hex = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        self.input_digests.insert(path.display().to_string(), format!("sha256:{hex}"));
        Ok(())
    }

    /// Writes `manifest.json` into `dir`, or prints to stderr without one.
    pub fn emit(&self, dir: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match dir {
            Some(dir) => fs::write(dir.join("manifest.json"), text + "\n")
                .with_context(|| format!("writing manifest into {}", dir.display())),
            None => {
                eprintln!("{text}");
                Ok(())
            }
        }
    }
}

/// Seed from the flag, or a fresh one from the clock (always reported).
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or_default();
        dasense_core::seed::mix64(nanos)
    })
}
