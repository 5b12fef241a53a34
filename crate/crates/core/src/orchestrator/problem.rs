use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{Language, SourceUnit};
use crate::execution::{SuiteKind, TestSuite};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("problems line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("problems file is empty")]
    Empty,
    #[error("duplicate problem id `{0}`")]
    DuplicateId(String),
    #[error("problem `{id}`: {kind:?} test suite: {message}")]
    Suite { id: String, kind: SuiteKind, message: String },
}

/// One line of the problems file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub problem_id: String,
    pub language: Language,
    pub slow_code: String,
    #[serde(default)]
    pub fast_code: Option<String>,
    /// Directory holding `public/` and `private/`, relative to the problems
    /// file. Defaults to `tests/<problem_id>`.
    #[serde(default)]
    pub tests_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub id: String,
    pub slow: SourceUnit,
    pub human_fast: Option<SourceUnit>,
    pub public_suite: TestSuite,
    /// Absent when loaded for search only and the directory does not exist.
    pub private_suite: Option<TestSuite>,
}

impl Problem {
    pub fn language(&self) -> Language {
        self.slow.language()
    }
}

/// Which suites must be present when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteRequirement {
    PublicOnly,
    Both,
}

pub fn load_problems(path: &Path, need: SuiteRequirement) -> Result<Vec<Problem>, ProblemError> {
    let io = |e: std::io::Error| ProblemError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let root = path.parent().unwrap_or(Path::new("."));
    let file = fs::File::open(path).map_err(io)?;
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| ProblemError::Malformed { line: i + 1, message };
        let rec: ProblemRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if !seen.insert(rec.problem_id.clone()) {
            return Err(ProblemError::DuplicateId(rec.problem_id));
        }
        let slow = SourceUnit::new(rec.slow_code, rec.language).map_err(|e| malformed(e.to_string()))?;
        let human_fast = rec
            .fast_code
            .filter(|c| !c.trim().is_empty())
            .map(|c| SourceUnit::new(c, rec.language))
            .transpose()
            .map_err(|e| malformed(e.to_string()))?;
        let tests = root.join(rec.tests_dir.unwrap_or_else(|| Path::new("tests").join(&rec.problem_id)));
        let load = |kind: SuiteKind| {
            TestSuite::load_dir(&tests.join(kind.dir_name()), kind).map_err(|e| ProblemError::Suite {
                id: rec.problem_id.clone(),
                kind,
                message: e.to_string(),
            })
        };
        let public_suite = load(SuiteKind::Public)?;
        let private_suite = match need {
            SuiteRequirement::Both => Some(load(SuiteKind::Private)?),
            SuiteRequirement::PublicOnly => load(SuiteKind::Private).ok(),
        };
        if let Some(private) = &private_suite {
            let leaked = public_suite.cases().iter().filter(|p| {
                private
                    .cases()
                    .iter()
                    .any(|q| q.input == p.input && q.expected_output == p.expected_output)
            });
            if leaked.count() > 0 {
                log::warn!("problem {}: public and private suites share test cases", rec.problem_id);
            }
        }
        problems.push(Problem {
            id: rec.problem_id,
            slow,
            human_fast,
            public_suite,
            private_suite,
        });
    }
    if problems.is_empty() {
        return Err(ProblemError::Empty);
    }
    Ok(problems)
}
