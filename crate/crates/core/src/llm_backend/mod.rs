//! Chat-completion backends.
//!
//! `HttpBackend` talks to a live endpoint, `ReplayBackend` serves recorded
//! completions from a cassette file, and `RecordingBackend` wraps any backend
//! and appends every completion it returns to a cassette.

mod cassette;
mod http;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::PromptBundle;

pub use cassette::{CassetteKey, CassetteRecord, RecordingBackend, ReplayBackend, CASSETTE_FORMAT, CASSETTE_VERSION};
pub use http::{ApiKey, HttpBackend, HttpConfig, Provider};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider error: {0}")]
    ProviderError(String),
    #[error("no recorded completion for prompt {hash} (temperature {temperature}, {num_samples} samples)")]
    CassetteMiss {
        hash: String,
        temperature: String,
        num_samples: usize,
    },
    #[error("API credential missing: set {0}")]
    AuthMissing(String),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: PromptBundle,
    pub temperature: f64,
    pub num_samples: usize,
    pub max_tokens: u32,
    pub model_name: String,
}

impl CompletionRequest {
    pub fn new(prompt: PromptBundle, model_name: impl Into<String>) -> Self {
        Self {
            prompt,
            temperature: 0.7,
            num_samples: 5,
            max_tokens: 2048,
            model_name: model_name.into(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.num_samples == 0 {
            return Err(LlmError::InvalidRequest("num_samples must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionBatch {
    pub texts: Vec<String>,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, serde_json::Value>,
    /// Set when the provider returned fewer texts than requested.
    #[serde(default)]
    pub truncated: bool,
}

impl CompletionBatch {
    pub fn new(texts: Vec<String>) -> Self {
        Self {
            texts,
            ..Self::default()
        }
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionBatch, LlmError>;
}

impl<F> LlmBackend for F
where
    F: Fn(&CompletionRequest) -> Result<CompletionBatch, LlmError> + Send + Sync,
{
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionBatch, LlmError> {
        self(req)
    }
}
