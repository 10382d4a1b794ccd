use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;

/// Everything needed to rerun a command. Passing the manifest back as
/// `--config` reproduces its outputs; only the timestamps differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub versions: BTreeMap<String, String>,
    /// Seeds of the named random streams, keyed by label.
    pub stage_seeds: BTreeMap<String, u64>,
    /// Template of per-replicate labels, when the command draws samples.
    pub replicate_label: Option<String>,
    pub replicates: Option<usize>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: Config,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, config_bytes: &[u8], started_unix: u64) -> Self {
        let versions = BTreeMap::from([
            ("episurvey".to_string(), episurvey::VERSION.to_string()),
            ("episurvey-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        RunManifest {
            command: command.to_string(),
            config_sha256: sha256_hex(config_bytes),
            master_seed: config.run.master_seed,
            versions,
            stage_seeds: BTreeMap::new(),
            replicate_label: None,
            replicates: None,
            outputs: Vec::new(),
            started_unix,
            finished_unix: started_unix,
            config: config.clone(),
        }
    }

    pub fn seed(&mut self, label: String) {
        let s = episurvey::seeds::derive_seed(self.master_seed, &label);
        self.stage_seeds.insert(label, s);
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }
}
