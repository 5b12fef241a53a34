use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionBatch, CompletionRequest, LlmBackend, LlmError};

pub const CASSETTE_FORMAT: &str = "evoperf-cassette";
pub const CASSETTE_VERSION: u32 = 1;
const HASH_DESCRIPTION: &str = "sha256(user_text), lowercase hex";

/// First line of every cassette.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    hash: String,
}

impl Header {
    fn current() -> Self {
        Self {
            format: CASSETTE_FORMAT.into(),
            version: CASSETTE_VERSION,
            hash: HASH_DESCRIPTION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub prompt_hash: String,
    pub model_name: String,
    pub temperature: f64,
    pub num_samples: usize,
    pub texts: Vec<String>,
}

/// Replay lookup key. Temperature is compared at four decimals so values
/// that went through text round trips still match.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CassetteKey {
    pub prompt_hash: String,
    pub temperature: String,
    pub num_samples: usize,
}

impl CassetteKey {
    fn new(prompt_hash: &str, temperature: f64, num_samples: usize) -> Self {
        Self {
            prompt_hash: prompt_hash.to_string(),
            temperature: format!("{temperature:.4}"),
            num_samples,
        }
    }

    pub fn of_request(req: &CompletionRequest) -> Self {
        Self::new(&req.prompt.hash(), req.temperature, req.num_samples)
    }

    pub fn of_record(rec: &CassetteRecord) -> Self {
        Self::new(&rec.prompt_hash, rec.temperature, rec.num_samples)
    }
}

fn cassette_err(path: &Path, message: impl Into<String>) -> LlmError {
    LlmError::Cassette {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn check_header(path: &Path, line: &str) -> Result<(), LlmError> {
    let header: Header =
        serde_json::from_str(line).map_err(|e| cassette_err(path, format!("line 1: bad header: {e}")))?;
    if header.format != CASSETTE_FORMAT || header.version != CASSETTE_VERSION {
        return Err(cassette_err(
            path,
            format!("unsupported cassette {} v{}", header.format, header.version),
        ));
    }
    Ok(())
}

/// Serves recorded completions. A key recorded several times replays its
/// entries in order and then keeps returning the last one.
#[derive(Debug)]
pub struct ReplayBackend {
    entries: HashMap<CassetteKey, Vec<Vec<String>>>,
    cursors: Mutex<HashMap<CassetteKey, usize>>,
    calls: AtomicUsize,
    records: usize,
}

impl ReplayBackend {
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let file = File::open(path).map_err(|e| cassette_err(path, e.to_string()))?;
        let mut records = Vec::new();
        let mut saw_header = false;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| cassette_err(path, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                check_header(path, &line)?;
                saw_header = true;
                continue;
            }
            let rec: CassetteRecord =
                serde_json::from_str(&line).map_err(|e| cassette_err(path, format!("line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        if !saw_header {
            return Err(cassette_err(path, "empty cassette"));
        }
        Ok(Self::from_records(records))
    }

    pub fn from_records(records: Vec<CassetteRecord>) -> Self {
        let n = records.len();
        let mut entries: HashMap<CassetteKey, Vec<Vec<String>>> = HashMap::new();
        for rec in records {
            entries.entry(CassetteKey::of_record(&rec)).or_default().push(rec.texts);
        }
        Self {
            entries,
            cursors: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
            records: n,
        }
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn records(&self) -> usize {
        self.records
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionBatch, LlmError> {
        req.validate()?;
        let key = CassetteKey::of_request(req);
        let Some(list) = self.entries.get(&key) else {
            return Err(LlmError::CassetteMiss {
                hash: key.prompt_hash,
                temperature: key.temperature,
                num_samples: key.num_samples,
            });
        };
        let mut cursors = self.cursors.lock().unwrap_or_else(|p| p.into_inner());
        let cursor = cursors.entry(key).or_insert(0);
        let texts = list[(*cursor).min(list.len() - 1)].clone();
        *cursor += 1;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut batch = CompletionBatch::new(texts);
        batch.truncated = batch.texts.len() < req.num_samples;
        batch.provider_meta.insert("source".into(), "replay".into());
        Ok(batch)
    }
}

/// Passes requests to `inner` and appends each returned batch to a cassette.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    file: Mutex<File>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> Result<Self, LlmError> {
        let existing = std::fs::read_to_string(path).unwrap_or_default();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| cassette_err(path, e.to_string()))?;
        match existing.lines().find(|l| !l.trim().is_empty()) {
            Some(first) => check_header(path, first)?,
            None => {
                let header = serde_json::to_string(&Header::current()).expect("header serializes");
                writeln!(file, "{header}").map_err(|e| cassette_err(path, e.to_string()))?;
            }
        }
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionBatch, LlmError> {
        let batch = self.inner.complete(req)?;
        let record = CassetteRecord {
            prompt_hash: req.prompt.hash(),
            model_name: req.model_name.clone(),
            temperature: req.temperature,
            num_samples: req.num_samples,
            texts: batch.texts.clone(),
        };
        let line = serde_json::to_string(&record).map_err(|e| cassette_err(&self.path, e.to_string()))?;
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(file, "{line}")
            .and_then(|_| file.flush())
            .map_err(|e| cassette_err(&self.path, e.to_string()))?;
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{Language, SourceUnit};
    use crate::prompting::{build_seed_prompt, PromptTemplates};

    fn request(code: &str) -> CompletionRequest {
        let slow = SourceUnit::new(code, Language::Python).unwrap();
        CompletionRequest::new(build_seed_prompt(&slow, &PromptTemplates::builtin()), "m")
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let counter = AtomicUsize::new(0);
        let live = |req: &CompletionRequest| {
            let k = counter.fetch_add(1, Ordering::SeqCst);
            Ok(CompletionBatch::new((0..req.num_samples).map(|i| format!("reply {k}.{i}")).collect()))
        };
        let recorder = RecordingBackend::create(live, &path).unwrap();
        let a = recorder.complete(&request("print(1)\n")).unwrap();
        let a2 = recorder.complete(&request("print(1)\n")).unwrap();
        let b = recorder.complete(&request("print(2)\n")).unwrap();
        drop(recorder);

        let replay = ReplayBackend::open(&path).unwrap();
        assert_eq!(replay.records(), 3);
        assert_eq!(replay.complete(&request("print(1)\n")).unwrap().texts, a.texts);
        assert_eq!(replay.complete(&request("print(1)\n")).unwrap().texts, a2.texts);
        // Exhausted key repeats its last entry.
        assert_eq!(replay.complete(&request("print(1)\n")).unwrap().texts, a2.texts);
        assert_eq!(replay.complete(&request("print(2)\n")).unwrap().texts, b.texts);
        assert_eq!(replay.calls(), 4);
    }

    #[test]
    fn unknown_prompt_misses() {
        let replay = ReplayBackend::from_records(vec![]);
        assert!(matches!(replay.complete(&request("x = 1\n")), Err(LlmError::CassetteMiss { .. })));
        let mut req = request("x = 1\n");
        req.temperature = 0.2;
        let rec = CassetteRecord {
            prompt_hash: req.prompt.hash(),
            model_name: "m".into(),
            temperature: 0.7,
            num_samples: 5,
            texts: vec![],
        };
        let replay = ReplayBackend::from_records(vec![rec]);
        assert!(matches!(replay.complete(&req), Err(LlmError::CassetteMiss { .. })));
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{\"format\":\"other\",\"version\":1,\"hash\":\"x\"}\n").unwrap();
        assert!(matches!(ReplayBackend::open(&path), Err(LlmError::Cassette { .. })));
        std::fs::write(&path, "").unwrap();
        assert!(ReplayBackend::open(&path).is_err());
    }

    #[test]
    fn invalid_requests_rejected() {
        let replay = ReplayBackend::from_records(vec![]);
        let mut req = request("x = 1\n");
        req.num_samples = 0;
        assert!(matches!(replay.complete(&req), Err(LlmError::InvalidRequest(_))));
        req.num_samples = 1;
        req.temperature = 2.5;
        assert!(matches!(replay.complete(&req), Err(LlmError::InvalidRequest(_))));
    }
}
