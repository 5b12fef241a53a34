use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use evoperf_core::llm_backend::{HttpConfig, Provider};
use evoperf_core::orchestrator::SearchConfig;

/// Flat run configuration. Every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    #[serde(flatten)]
    pub search: SearchConfig,
    pub provider: Provider,
    pub endpoint_url: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub request_timeout_s: f64,
    pub max_inflight: usize,
    pub max_attempts: u32,
    /// Custom prompt template file; the built-in one is used when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let http = HttpConfig::default();
        Self {
            search: SearchConfig::default(),
            provider: http.provider,
            endpoint_url: http.endpoint_url,
            api_key_env: "LLM_API_KEY".into(),
            request_timeout_s: http.request_timeout_s,
            max_inflight: http.max_inflight,
            max_attempts: http.max_attempts,
            templates: None,
            jobs: 1,
            seed: 0,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let known = known_keys();
        let unknown: Vec<&String> = table.keys().filter(|k| !known.contains(k.as_str())).collect();
        if !unknown.is_empty() {
            bail!("config {}: unknown keys {:?}", path.display(), unknown);
        }
        let mut cfg: Config = toml::Value::Table(table)
            .try_into()
            .with_context(|| format!("config {}", path.display()))?;
        if let Some(t) = &cfg.templates {
            if t.is_relative() {
                cfg.templates = Some(path.parent().unwrap_or(Path::new(".")).join(t));
            }
        }
        cfg.search.validate()?;
        Ok(cfg)
    }

    pub fn http(&self) -> HttpConfig {
        HttpConfig {
            endpoint_url: self.endpoint_url.clone(),
            provider: self.provider,
            request_timeout_s: self.request_timeout_s,
            max_inflight: self.max_inflight,
            max_attempts: self.max_attempts,
            ..HttpConfig::default()
        }
    }
}

fn known_keys() -> BTreeSet<String> {
    let mut keys: BTreeSet<String> = match serde_json::to_value(Config::default()) {
        Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    };
    keys.insert("templates".into());
    keys
}
