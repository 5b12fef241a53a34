use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IterationTrace, OrchestratorError};
use crate::execution::ExecutionRecord;
use crate::selection::Candidate;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Search state after seeding or after a completed generation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub problem_id: String,
    pub slow_public: ExecutionRecord,
    /// First iteration still to run.
    pub next_iteration: usize,
    pub solutions: Vec<Candidate>,
    pub previous_representatives: Option<Vec<String>>,
    pub trace: Vec<IterationTrace>,
}

/// Where a problem's checkpoint lives inside a run directory.
#[derive(Debug, Clone)]
pub struct CheckpointStore {
    dir: PathBuf,
}

impl CheckpointStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, problem_id: &str) -> PathBuf {
        self.dir.join(format!("{problem_id}.checkpoint.json"))
    }

    pub fn load(&self, problem_id: &str) -> Result<Option<Checkpoint>, OrchestratorError> {
        let path = self.path(problem_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(checkpoint_err(&path, e)),
        };
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| checkpoint_err(&path, e))?;
        if cp.format_version != CHECKPOINT_VERSION {
            return Err(checkpoint_err(&path, format!("unsupported version {}", cp.format_version)));
        }
        if cp.problem_id != problem_id {
            return Err(checkpoint_err(&path, format!("belongs to problem {}", cp.problem_id)));
        }
        Ok(Some(cp))
    }

    /// Writes through a temporary file so an interrupted save never leaves a
    /// truncated checkpoint behind.
    pub fn save(&self, cp: &Checkpoint) -> Result<(), OrchestratorError> {
        let path = self.path(&cp.problem_id);
        fs::create_dir_all(&self.dir).map_err(|e| checkpoint_err(&path, e))?;
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string(cp).map_err(|e| checkpoint_err(&path, e))?;
        fs::write(&tmp, text).map_err(|e| checkpoint_err(&path, e))?;
        fs::rename(&tmp, &path).map_err(|e| checkpoint_err(&path, e))
    }

    pub fn remove(&self, problem_id: &str) -> Result<(), OrchestratorError> {
        let path = self.path(problem_id);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(checkpoint_err(&path, e)),
            _ => Ok(()),
        }
    }
}

fn checkpoint_err(path: &Path, e: impl ToString) -> OrchestratorError {
    OrchestratorError::Checkpoint {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
