use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;

/// Everything that determines a run's outputs. Hashed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCore {
    pub tool_version: String,
    pub command: String,
    pub config: Config,
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cassette: Option<String>,
    pub template_version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub core: ManifestCore,
    /// sha256 of the core, timestamps excluded.
    pub hash: String,
    pub started_unix_s: u64,
    #[serde(default)]
    pub finished_unix_s: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(core: ManifestCore) -> Self {
        let bytes = serde_json::to_vec(&core).expect("manifest serializes");
        let hash = hex::encode(Sha256::digest(&bytes));
        Self {
            core,
            hash,
            started_unix_s: now(),
            finished_unix_s: 0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_s = now();
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
    }
}

pub fn core(command: &str, config: &Config, inputs: &[(&str, &Path)], cassette: Option<&Path>, template_version: &str) -> ManifestCore {
    ManifestCore {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config: config.clone(),
        inputs: inputs.iter().map(|(k, p)| (k.to_string(), p.display().to_string())).collect(),
        cassette: cassette.map(|p| p.display().to_string()),
        template_version: template_version.to_string(),
        seed: config.seed,
    }
}
