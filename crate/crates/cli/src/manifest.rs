//! Reproducibility manifest written before a command starts work.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the config file bytes, when the command takes one.
    pub config_hash: Option<String>,
    pub code_version: String,
    pub seeds: BTreeMap<String, u64>,
    pub started_at: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            command_line: std::env::args().collect(),
            config_hash: None,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: BTreeMap::new(),
            started_at: chrono::Utc::now().to_rfc3339(),
            outputs,
        }
    }

    pub fn with_config(mut self, bytes: &[u8]) -> Self {
        self.config_hash = Some(hex::encode(Sha256::digest(bytes)));
        self
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    /// Write to `path`; an existing manifest is never overwritten.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .and_then(|mut f| std::io::Write::write_all(&mut f, text.as_bytes()))
    }
}
