use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExecutionError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub input: Vec<u8>,
    pub expected_output: Vec<u8>,
}

impl TestCase {
    pub fn new(id: impl Into<String>, input: impl Into<Vec<u8>>, expected: impl Into<Vec<u8>>) -> Self {
        Self {
            id: id.into(),
            input: input.into(),
            expected_output: expected.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Public,
    Private,
}

impl SuiteKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            SuiteKind::Public => "public",
            SuiteKind::Private => "private",
        }
    }
}

/// A non-empty list of test cases with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    kind: SuiteKind,
    cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(kind: SuiteKind, cases: Vec<TestCase>) -> Result<Self, ExecutionError> {
        if cases.is_empty() {
            return Err(ExecutionError::EmptySuite);
        }
        let mut seen = HashSet::new();
        for case in &cases {
            if !seen.insert(case.id.as_str()) {
                return Err(ExecutionError::DuplicateCase(case.id.clone()));
            }
        }
        Ok(Self { kind, cases })
    }

    /// Loads `<dir>/<n>.in` / `<dir>/<n>.out` pairs, ordered numerically by
    /// `n` where possible.
    pub fn load_dir(dir: &Path, kind: SuiteKind) -> Result<Self, ExecutionError> {
        let io_err = |e: std::io::Error| ExecutionError::SuiteIo {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut stems = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.extension().is_some_and(|e| e == "in") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    stems.push(stem.to_string());
                }
            }
        }
        stems.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.cmp(b),
        });
        let mut cases = Vec::with_capacity(stems.len());
        for stem in stems {
            let input = fs::read(dir.join(format!("{stem}.in"))).map_err(io_err)?;
            let out_path = dir.join(format!("{stem}.out"));
            let expected = fs::read(&out_path).map_err(|e| ExecutionError::SuiteIo {
                path: out_path.display().to_string(),
                message: e.to_string(),
            })?;
            cases.push(TestCase::new(stem, input, expected));
        }
        Self::new(kind, cases)
    }

    /// Writes the suite in the on-disk layout read by [`TestSuite::load_dir`].
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for case in &self.cases {
            fs::write(dir.join(format!("{}.in", case.id)), &case.input)?;
            fs::write(dir.join(format!("{}.out", case.id)), &case.expected_output)?;
        }
        Ok(())
    }

    pub fn kind(&self) -> SuiteKind {
        self.kind
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}
