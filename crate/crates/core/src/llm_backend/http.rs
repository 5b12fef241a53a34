use std::fmt;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompletionBatch, CompletionRequest, LlmBackend, LlmError};

/// Wire dialect of the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    /// `/v1/chat/completions`-style endpoints.
    #[default]
    Openai,
    Anthropic,
}

/// An API credential. Never printed.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn from_env(var: &str) -> Result<Self, LlmError> {
        match std::env::var(var) {
            Ok(v) if !v.trim().is_empty() => Ok(Self(v.trim().to_string())),
            _ => Err(LlmError::AuthMissing(var.to_string())),
        }
    }

    fn scrub(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.0, "<redacted>")
        }
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint_url: String,
    pub provider: Provider,
    pub request_timeout_s: f64,
    pub max_inflight: usize,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            provider: Provider::Openai,
            request_timeout_s: 120.0,
            max_inflight: 4,
            max_attempts: 5,
            backoff_base_ms: 500,
            backoff_cap_ms: 30_000,
        }
    }
}

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(Value),
    Retry(String),
    Fatal(String),
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    cfg: HttpConfig,
    key: ApiKey,
    permits: Permits,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("cfg", &self.cfg)
            .field("key", &self.key)
            .finish()
    }
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig, key: ApiKey) -> Result<Self, LlmError> {
        if cfg.max_attempts == 0 || cfg.max_inflight == 0 {
            return Err(LlmError::InvalidRequest("max_attempts and max_inflight must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.request_timeout_s))
            .build()
            .map_err(|e| LlmError::ProviderError(e.to_string()))?;
        let permits = Permits {
            free: Mutex::new(cfg.max_inflight),
            cv: Condvar::new(),
        };
        Ok(Self {
            client,
            cfg,
            key,
            permits,
        })
    }

    fn body(&self, req: &CompletionRequest, n: usize) -> Value {
        match self.cfg.provider {
            Provider::Openai => json!({
                "model": req.model_name,
                "messages": [
                    {"role": "system", "content": req.prompt.system_text},
                    {"role": "user", "content": req.prompt.user_text},
                ],
                "temperature": req.temperature,
                "n": n,
                "max_tokens": req.max_tokens,
            }),
            Provider::Anthropic => json!({
                "model": req.model_name,
                "system": req.prompt.system_text,
                "messages": [{"role": "user", "content": req.prompt.user_text}],
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
            }),
        }
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut builder = self.client.post(&self.cfg.endpoint_url).json(body);
        builder = match self.cfg.provider {
            Provider::Openai => builder.bearer_auth(&self.key.0),
            Provider::Anthropic => builder
                .header("x-api-key", &self.key.0)
                .header("anthropic-version", "2023-06-01"),
        };
        let resp = match builder.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(self.key.scrub(&e.to_string())),
        };
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        let snippet: String = self.key.scrub(&text).chars().take(300).collect();
        if status.is_success() {
            match serde_json::from_str(&text) {
                Ok(v) => Attempt::Done(v),
                Err(e) => Attempt::Fatal(format!("malformed response body: {e}")),
            }
        } else if status.as_u16() == 429 || status.is_server_error() {
            Attempt::Retry(format!("HTTP {status}: {snippet}"))
        } else {
            Attempt::Fatal(format!("HTTP {status}: {snippet}"))
        }
    }

    fn call(&self, body: &Value) -> Result<Value, LlmError> {
        let mut last = String::new();
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                let delay = self
                    .cfg
                    .backoff_base_ms
                    .saturating_mul(1 << (attempt - 1).min(20))
                    .min(self.cfg.backoff_cap_ms);
                log::warn!("completion attempt {attempt} failed ({last}); retrying in {delay} ms");
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(body) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(msg) => return Err(LlmError::ProviderError(msg)),
                Attempt::Retry(msg) => last = msg,
            }
        }
        Err(LlmError::ProviderError(format!(
            "gave up after {} attempts: {last}",
            self.cfg.max_attempts
        )))
    }

    fn texts(&self, v: &Value) -> Vec<String> {
        match self.cfg.provider {
            Provider::Openai => v["choices"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|c| c["message"]["content"].as_str().map(str::to_string))
                .collect(),
            Provider::Anthropic => {
                let text: String = v["content"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter(|b| b["type"] == "text")
                    .filter_map(|b| b["text"].as_str())
                    .collect();
                if text.is_empty() {
                    vec![]
                } else {
                    vec![text]
                }
            }
        }
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionBatch, LlmError> {
        req.validate()?;
        let _permit = self.permits.acquire();
        let mut batch = CompletionBatch::default();
        // Providers that ignore `n` return one choice per call; top up with
        // further calls, at most one per requested sample.
        for _ in 0..req.num_samples {
            let missing = req.num_samples - batch.texts.len();
            if missing == 0 {
                break;
            }
            let n = match self.cfg.provider {
                Provider::Openai => missing,
                Provider::Anthropic => 1,
            };
            let v = self.call(&self.body(req, n))?;
            let texts = self.texts(&v);
            if let Some(model) = v.get("model") {
                batch.provider_meta.insert("model".into(), model.clone());
            }
            if texts.is_empty() {
                break;
            }
            batch.texts.extend(texts.into_iter().take(missing));
        }
        batch.truncated = batch.texts.len() < req.num_samples;
        Ok(batch)
    }
}
