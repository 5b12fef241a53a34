//! Running candidates against test suites and timing them.
//!
//! Every case is executed `runs_per_measurement` times; the first run is a
//! warm-up and is excluded from the reported runtime. Timed runs of all
//! candidates go through one process-wide lane so measurements never overlap.

mod judge;
mod sandbox;
mod suite;

use std::fs;
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{Language, SourceUnit};

pub use judge::outputs_match;
pub use suite::{SuiteKind, TestCase, TestSuite};

use sandbox::{Invocation, Outcome};

#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("test suite has no cases")]
    EmptySuite,
    #[error("duplicate test case id `{0}`")]
    DuplicateCase(String),
    #[error("cannot read test suite at {path}: {message}")]
    SuiteIo { path: String, message: String },
    #[error("sandbox failure: {0}")]
    SandboxFailure(String),
    #[error("invalid runner configuration: {0}")]
    InvalidConfig(String),
    #[error("candidate runtime is zero; speedup is unbounded")]
    DivisionDomain,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunnerConfig {
    /// Runs per test case; the first is discarded.
    pub runs_per_measurement: usize,
    pub timeout_s: f64,
    pub compile_timeout_s: f64,
    pub python_bin: String,
    pub cpp_compiler: String,
    pub compile_flags: Vec<String>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            runs_per_measurement: 25,
            timeout_s: 10.0,
            compile_timeout_s: 60.0,
            python_bin: "python3".to_string(),
            cpp_compiler: "g++".to_string(),
            compile_flags: vec!["-O3".to_string(), "-std=c++17".to_string()],
        }
    }
}

impl RunnerConfig {
    pub fn validate(&self) -> Result<(), ExecutionError> {
        if self.runs_per_measurement < 2 {
            return Err(ExecutionError::InvalidConfig(
                "runs_per_measurement must be at least 2 (the first run is discarded)".into(),
            ));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ExecutionError::InvalidConfig("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Ok,
    WrongOutput,
    Timeout,
    RuntimeError,
    CompileError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub passed: bool,
    pub runtime_s: f64,
    pub status: CaseStatus,
    /// Stdout of the first run, kept in memory for re-judging.
    #[serde(skip)]
    pub output: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub suite: SuiteKind,
    pub accuracy: f64,
    pub mean_runtime_s: f64,
    pub per_case: Vec<CaseResult>,
    /// Whether timings were taken inside the serialized measurement lane.
    pub serialized_timing: bool,
}

impl ExecutionRecord {
    fn from_cases(suite: SuiteKind, per_case: Vec<CaseResult>, serialized_timing: bool) -> Self {
        let n = per_case.len().max(1) as f64;
        let passed = per_case.iter().filter(|c| c.passed).count() as f64;
        let mean_runtime_s = per_case.iter().map(|c| c.runtime_s).sum::<f64>() / n;
        Self {
            suite,
            accuracy: passed / n,
            mean_runtime_s,
            per_case,
            serialized_timing,
        }
    }

    /// Record for a program that could not be built or extracted at all.
    /// Its runtime is pinned to the timeout, like a timed-out case.
    pub fn failed_build(suite: SuiteKind, penalty_s: f64, reason: &str) -> Self {
        Self::from_cases(
            suite,
            vec![CaseResult {
                case_id: reason.to_string(),
                passed: false,
                runtime_s: penalty_s,
                status: CaseStatus::CompileError,
                output: None,
            }],
            false,
        )
    }

    pub fn is_fully_correct(&self) -> bool {
        self.accuracy >= 1.0
    }

    pub fn has_compile_error(&self) -> bool {
        self.per_case.iter().any(|c| c.status == CaseStatus::CompileError)
    }

    /// Recomputes accuracy from stored outputs. Cases without a stored output
    /// keep their original verdict.
    pub fn rejudge(&self, suite: &TestSuite) -> f64 {
        let passed = self
            .per_case
            .iter()
            .filter(|c| {
                match (&c.output, suite.cases().iter().find(|t| t.id == c.case_id)) {
                    (Some(out), Some(case)) if c.status == CaseStatus::Ok || c.status == CaseStatus::WrongOutput => {
                        outputs_match(&case.expected_output, out)
                    }
                    _ => c.passed,
                }
            })
            .count();
        passed as f64 / self.per_case.len().max(1) as f64
    }
}

static TIMING_LANE: Mutex<()> = Mutex::new(());

fn timing_lane() -> MutexGuard<'static, ()> {
    TIMING_LANE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Mean of runs 2..N of one measurement.
pub fn protocol_mean(samples: &[f64]) -> f64 {
    match samples {
        [] => 0.0,
        [only] => *only,
        [_, rest @ ..] => rest.iter().sum::<f64>() / rest.len() as f64,
    }
}

struct Prepared {
    _dir: tempfile::TempDir,
    invocation: Invocation,
}

fn prepare(src: &SourceUnit, cfg: &RunnerConfig) -> Result<Result<Prepared, String>, ExecutionError> {
    let dir = tempfile::Builder::new()
        .prefix("evoperf-cand-")
        .tempdir()
        .map_err(|e| ExecutionError::SandboxFailure(format!("cannot create work dir: {e}")))?;
    let workdir = dir.path().to_path_buf();
    let timeout = Duration::from_secs_f64(cfg.timeout_s);
    let source_name = format!("main.{}", src.language().source_extension());
    fs::write(workdir.join(&source_name), src.text())
        .map_err(|e| ExecutionError::SandboxFailure(format!("cannot write source: {e}")))?;
    let invocation = match src.language() {
        Language::Python => Invocation {
            program: sandbox::resolve_program(&cfg.python_bin),
            args: vec![source_name],
            workdir,
            timeout,
        },
        Language::Cpp => {
            let mut args = cfg.compile_flags.clone();
            args.extend([source_name, "-o".to_string(), "prog".to_string()]);
            let build = Invocation {
                program: sandbox::resolve_program(&cfg.cpp_compiler),
                args,
                workdir: workdir.clone(),
                timeout: Duration::from_secs_f64(cfg.compile_timeout_s),
            };
            let (ok, stderr) = sandbox::run_build(&build).map_err(|e| {
                ExecutionError::SandboxFailure(format!("cannot launch compiler `{}`: {e}", cfg.cpp_compiler))
            })?;
            if !ok {
                log::debug!("compile error: {}", stderr.lines().next().unwrap_or(""));
                return Ok(Err("compile".to_string()));
            }
            Invocation {
                program: workdir.join("prog"),
                args: vec![],
                workdir,
                timeout,
            }
        }
    };
    Ok(Ok(Prepared { _dir: dir, invocation }))
}

fn launch_error(cfg: &RunnerConfig, e: std::io::Error) -> ExecutionError {
    ExecutionError::SandboxFailure(format!("cannot launch program (python_bin `{}`): {e}", cfg.python_bin))
}

fn measure_case(inv: &Invocation, case: &TestCase, runs: usize, cfg: &RunnerConfig) -> Result<CaseResult, ExecutionError> {
    let mut samples = Vec::with_capacity(runs);
    let mut first_output = None;
    for _ in 0..runs {
        let run = sandbox::run_once(inv, &case.input).map_err(|e| launch_error(cfg, e))?;
        let failure = match run.outcome {
            Outcome::TimedOut => Some(CaseStatus::Timeout),
            Outcome::Exited { status, stdout, truncated } => {
                let verdict = if !status.success() {
                    Some(CaseStatus::RuntimeError)
                } else if truncated || !outputs_match(&case.expected_output, &stdout) {
                    Some(CaseStatus::WrongOutput)
                } else {
                    None
                };
                if first_output.is_none() {
                    first_output = Some(stdout);
                }
                verdict
            }
        };
        if let Some(status) = failure {
            // A failing run settles the verdict; further runs would only burn time.
            let runtime_s = if status == CaseStatus::Timeout {
                cfg.timeout_s
            } else {
                samples.push(run.elapsed.as_secs_f64());
                protocol_mean(&samples)
            };
            return Ok(CaseResult {
                case_id: case.id.clone(),
                passed: false,
                runtime_s,
                status,
                output: first_output,
            });
        }
        samples.push(run.elapsed.as_secs_f64());
    }
    Ok(CaseResult {
        case_id: case.id.clone(),
        passed: true,
        runtime_s: protocol_mean(&samples),
        status: CaseStatus::Ok,
        output: first_output,
    })
}

/// Executes `src` on every case of `suite` under the repeated-timing protocol.
pub fn run_candidate(src: &SourceUnit, suite: &TestSuite, cfg: &RunnerConfig) -> Result<ExecutionRecord, ExecutionError> {
    cfg.validate()?;
    if suite.is_empty() {
        return Err(ExecutionError::EmptySuite);
    }
    let prepared = match prepare(src, cfg)? {
        Ok(p) => p,
        Err(reason) => return Ok(ExecutionRecord::failed_build(suite.kind(), cfg.timeout_s, &reason)),
    };
    let _lane = timing_lane();
    let per_case = suite
        .cases()
        .iter()
        .map(|case| measure_case(&prepared.invocation, case, cfg.runs_per_measurement, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExecutionRecord::from_cases(suite.kind(), per_case, true))
}

/// Single-run correctness check outside the timing lane. Runtimes are the
/// raw single-run times.
pub fn judge_correctness(src: &SourceUnit, suite: &TestSuite, cfg: &RunnerConfig) -> Result<ExecutionRecord, ExecutionError> {
    let prepared = match prepare(src, cfg)? {
        Ok(p) => p,
        Err(reason) => return Ok(ExecutionRecord::failed_build(suite.kind(), cfg.timeout_s, &reason)),
    };
    let per_case = suite
        .cases()
        .iter()
        .map(|case| measure_case(&prepared.invocation, case, 1, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExecutionRecord::from_cases(suite.kind(), per_case, false))
}

/// Raw per-run wall times of one case, for protocol checks.
pub fn sample_runtimes(src: &SourceUnit, case: &TestCase, runs: usize, cfg: &RunnerConfig) -> Result<Vec<f64>, ExecutionError> {
    let prepared = prepare(src, cfg)?
        .map_err(|_| ExecutionError::SandboxFailure("fixture program failed to build".into()))?;
    let _lane = timing_lane();
    (0..runs)
        .map(|_| {
            sandbox::run_once(&prepared.invocation, &case.input)
                .map(|r| r.elapsed.as_secs_f64())
                .map_err(|e| launch_error(cfg, e))
        })
        .collect()
}

/// `slow / candidate` mean runtime. Zero candidate runtime yields `+inf` and
/// should be treated as a flagged value.
pub fn speedup(slow: &ExecutionRecord, candidate: &ExecutionRecord) -> f64 {
    checked_speedup(slow, candidate).unwrap_or(f64::INFINITY)
}

pub fn checked_speedup(slow: &ExecutionRecord, candidate: &ExecutionRecord) -> Result<f64, ExecutionError> {
    if candidate.mean_runtime_s <= 0.0 {
        return Err(ExecutionError::DivisionDomain);
    }
    Ok(slow.mean_runtime_s / candidate.mean_runtime_s)
}
