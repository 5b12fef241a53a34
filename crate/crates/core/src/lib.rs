pub mod abstraction;
pub mod execution;
pub mod num;
pub mod pattern_base;
pub mod selection;
pub mod prompting;
pub mod llm_backend;
pub mod metrics_report;
pub mod orchestrator;

/// Scalar used by the concrete pipeline.
pub type Score = f64;
pub type ScoreVec = pattern_base::ScoreVector<Score>;
pub type Judged = metrics_report::JudgedCandidate<Score>;
pub type Report = metrics_report::EvalReport<Score>;
