//! The evolutionary search loop for a single problem.
//!
//! The population is seeded from a plain instruction prompt. Each iteration
//! then selects representatives, retrieves one similar and one different
//! optimization pattern, asks the model for new programs through the guided
//! reasoning prompt and adds whatever it returns to the pool. The search stops
//! early once the representative set stops changing and already holds a
//! program that clears the speedup threshold.

mod checkpoint;
mod problem;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_code, SourceUnit};
use crate::execution::{run_candidate, ExecutionError, ExecutionRecord, RunnerConfig, SuiteKind};
use crate::llm_backend::{CompletionRequest, LlmBackend, LlmError};
use crate::metrics_report::qualifies_opt;
use crate::pattern_base::{retrieve_patterns, Bm25Params, PatternBase, PatternError, RetrievalParams};
use crate::prompting::{build_gocot_prompt, build_seed_prompt, parse_response, ParseStatus, PromptBundle, PromptTemplates};
use crate::selection::{final_rerank, select_representatives, Candidate, Origin, RepresentativeSet, SelectionError};
use crate::Score;

pub use checkpoint::{Checkpoint, CheckpointStore, CHECKPOINT_VERSION};
pub use problem::{load_problems, Problem, ProblemError, ProblemRecord, SuiteRequirement};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Execution(#[from] ExecutionError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("pattern base is {base}, problem is {problem}")]
    LanguageMismatch { base: String, problem: String },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error(transparent)]
    Provider(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub num_representatives: usize,
    pub max_iterations: usize,
    pub samples_per_call: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
    /// Soft cap on prompt length; representatives are dropped to fit.
    pub max_prompt_chars: usize,
    pub similar_patterns: usize,
    pub different_patterns: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    #[serde(flatten)]
    pub runner: RunnerConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            num_representatives: 3,
            max_iterations: 4,
            samples_per_call: 5,
            temperature: 0.7,
            max_tokens: 2048,
            model_name: "gpt-3.5-turbo".into(),
            max_prompt_chars: 24_000,
            similar_patterns: 1,
            different_patterns: 1,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            runner: RunnerConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::InvalidConfig(m.into()));
        if self.num_representatives == 0 {
            return bad("num_representatives must be at least 1");
        }
        if self.samples_per_call == 0 {
            return bad("samples_per_call must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if !(self.bm25_k1 >= 0.0 && (0.0..=1.0).contains(&self.bm25_b)) {
            return bad("bm25_k1 must be non-negative and bm25_b in [0, 1]");
        }
        self.runner.validate()?;
        Ok(())
    }

    pub fn retrieval(&self) -> RetrievalParams<Score> {
        RetrievalParams {
            bm25: Bm25Params {
                k1: self.bm25_k1,
                b: self.bm25_b,
            },
            similar: self.similar_patterns,
            different: self.different_patterns,
        }
    }

    fn request(&self, prompt: PromptBundle) -> CompletionRequest {
        CompletionRequest {
            prompt,
            temperature: self.temperature,
            num_samples: self.samples_per_call,
            max_tokens: self.max_tokens,
            model_name: self.model_name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    ProviderFailure,
}

/// What happened in one generation round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub prompt_hash: String,
    pub pattern_ids: Vec<usize>,
    pub representative_ids: Vec<String>,
    pub new_candidate_ids: Vec<String>,
    pub unparseable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub problem_id: String,
    /// Every candidate in final rank order.
    pub ranked: Vec<Candidate>,
    /// Loop iterations entered, including one that ended by convergence.
    pub iterations_run: usize,
    pub termination: Termination,
    pub slow_public: ExecutionRecord,
    pub trace: Vec<IterationTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
}

impl OptimizationResult {
    pub fn best(&self) -> Option<&Candidate> {
        self.ranked.first()
    }
}

/// Runs the search for one problem. Holds everything that stays fixed across
/// problems of a run.
pub struct Optimizer<'a, B: ?Sized> {
    pub config: &'a SearchConfig,
    pub base: &'a PatternBase,
    pub templates: &'a PromptTemplates,
    pub backend: &'a B,
    /// Persist state after seeding and after every round.
    pub checkpoints: Option<&'a CheckpointStore>,
}

impl<'a, B: LlmBackend + ?Sized> Optimizer<'a, B> {
    pub fn new(config: &'a SearchConfig, base: &'a PatternBase, templates: &'a PromptTemplates, backend: &'a B) -> Self {
        Self {
            config,
            base,
            templates,
            backend,
            checkpoints: None,
        }
    }

    pub fn with_checkpoints(mut self, store: &'a CheckpointStore) -> Self {
        self.checkpoints = Some(store);
        self
    }

    /// Measures the slow program on the public suite.
    pub fn measure_slow(&self, p: &Problem) -> Result<ExecutionRecord, OrchestratorError> {
        let rec = run_candidate(&p.slow, &p.public_suite, &self.config.runner)?;
        if !rec.is_fully_correct() {
            log::warn!("problem {}: slow program fails {:.0}% of its public cases", p.id, 100.0 * (1.0 - rec.accuracy));
        }
        Ok(rec)
    }

    /// Seeds the population from the model. Replies without extractable code
    /// are kept as failed candidates so the pool size matches the request.
    pub fn initialize_population(&self, p: &Problem, slow: &ExecutionRecord) -> Result<Vec<Candidate>, OrchestratorError> {
        let req = self.config.request(build_seed_prompt(&p.slow, self.templates));
        let batch = self.backend.complete(&req)?;
        let mut out = Vec::with_capacity(batch.texts.len());
        for (k, text) in batch.texts.iter().enumerate() {
            let id = format!("seed-{k}");
            let parsed = parse_response(text, p.language());
            let cand = match self.execute(&id, &parsed.code, parsed.parse_status, p, slow, Origin::Seed)? {
                Some(c) => c,
                None => {
                    let raw = if text.trim().is_empty() { "# empty reply\n" } else { text.as_str() };
                    let source = SourceUnit::new(raw, p.language()).expect("reply text is not blank");
                    let record = ExecutionRecord::failed_build(SuiteKind::Public, self.config.runner.timeout_s, "unparseable reply");
                    Candidate::new(id, source, record, slow, Origin::Seed)
                }
            };
            out.push(cand);
        }
        Ok(out)
    }

    /// Seeds the population from given programs instead of the model.
    pub fn seeds_from_sources(&self, p: &Problem, slow: &ExecutionRecord, seeds: &[SourceUnit]) -> Result<Vec<Candidate>, OrchestratorError> {
        seeds
            .iter()
            .enumerate()
            .map(|(k, src)| {
                let record = run_candidate(src, &p.public_suite, &self.config.runner)?;
                Ok(Candidate::new(format!("seed-{k}"), src.clone(), record, slow, Origin::Seed))
            })
            .collect()
    }

    fn execute(
        &self,
        id: &str,
        code: &str,
        status: ParseStatus,
        p: &Problem,
        slow: &ExecutionRecord,
        origin: Origin,
    ) -> Result<Option<Candidate>, OrchestratorError> {
        if status == ParseStatus::Failed || code.trim().is_empty() {
            return Ok(None);
        }
        let Ok(source) = SourceUnit::new(code, p.language()) else {
            return Ok(None);
        };
        let record = run_candidate(&source, &p.public_suite, &self.config.runner)?;
        Ok(Some(Candidate::new(id, source, record, slow, origin)))
    }

    /// Full search for `p`. `seeds` replaces the model-generated initial
    /// population when given. With checkpoints enabled, an existing
    /// checkpoint for the problem is resumed.
    pub fn optimize(&self, p: &Problem, seeds: Option<&[SourceUnit]>) -> Result<OptimizationResult, OrchestratorError> {
        self.config.validate()?;
        if self.base.language != p.language() {
            return Err(OrchestratorError::LanguageMismatch {
                base: self.base.language.to_string(),
                problem: p.language().to_string(),
            });
        }
        let resumed = match self.checkpoints {
            Some(store) => store.load(&p.id)?,
            None => None,
        };
        let mut state = match resumed {
            Some(cp) => {
                log::info!("problem {}: resuming at iteration {}", p.id, cp.next_iteration);
                cp
            }
            None => {
                let slow = self.measure_slow(p)?;
                let solutions = match seeds {
                    Some(s) => self.seeds_from_sources(p, &slow, s)?,
                    None => match self.initialize_population(p, &slow) {
                        Ok(s) => s,
                        Err(OrchestratorError::Provider(e)) => {
                            return Ok(provider_failure(p, slow, Vec::new(), Vec::new(), 0, e))
                        }
                        Err(e) => return Err(e),
                    },
                };
                let cp = Checkpoint {
                    format_version: CHECKPOINT_VERSION,
                    problem_id: p.id.clone(),
                    slow_public: slow,
                    next_iteration: 1,
                    solutions,
                    previous_representatives: None,
                    trace: Vec::new(),
                };
                self.save(&cp)?;
                cp
            }
        };

        let slow_abs = abstract_code(&p.slow);
        let retrieval = self.config.retrieval();
        let n_s = self.config.num_representatives;
        let mut termination = Termination::MaxIterations;
        let mut iterations_run = state.next_iteration.saturating_sub(1);
        for i in state.next_iteration..=self.config.max_iterations {
            iterations_run = i;
            let rs = if state.solutions.is_empty() {
                RepresentativeSet::empty(n_s)
            } else {
                select_representatives(&state.solutions, n_s)?
            };
            let ids = rs.ids();
            if state.previous_representatives.as_ref() == Some(&ids) && self.has_qualifying(&rs, &state.slow_public) {
                termination = Termination::Converged;
                break;
            }

            let pats = retrieve_patterns(&slow_abs, rs.iter().map(|c| &c.abstraction), self.base, &retrieval)?;
            let prompt = build_gocot_prompt(&p.slow, &rs, &pats, self.templates, self.config.max_prompt_chars);
            let prompt_hash = prompt.hash();
            let batch = match self.backend.complete(&self.config.request(prompt)) {
                Ok(b) => b,
                Err(e) => {
                    return Ok(provider_failure(p, state.slow_public, state.solutions, state.trace, i, e));
                }
            };

            let mut fresh = Vec::new();
            let mut unparseable = 0;
            for (k, text) in batch.texts.iter().enumerate() {
                let parsed = parse_response(text, p.language());
                let id = format!("it{i}-{k}");
                let origin = Origin::Iteration(i as u32);
                match self.execute(&id, &parsed.code, parsed.parse_status, p, &state.slow_public, origin)? {
                    Some(c) => fresh.push(c),
                    None => unparseable += 1,
                }
            }
            state.trace.push(IterationTrace {
                iteration: i,
                prompt_hash,
                pattern_ids: pats.ids(),
                representative_ids: ids.clone(),
                new_candidate_ids: fresh.iter().map(|c| c.id.clone()).collect(),
                unparseable,
            });
            state.solutions = rs.members.into_iter().chain(fresh).collect();
            state.previous_representatives = Some(ids);
            state.next_iteration = i + 1;
            self.save(&state)?;
        }

        if let Some(store) = self.checkpoints {
            store.remove(&p.id)?;
        }
        Ok(OptimizationResult {
            problem_id: p.id.clone(),
            ranked: final_rerank(&state.solutions),
            iterations_run,
            termination,
            slow_public: state.slow_public,
            trace: state.trace,
            provider_error: None,
        })
    }

    fn has_qualifying(&self, rs: &RepresentativeSet, slow: &ExecutionRecord) -> bool {
        rs.iter().any(|c| qualifies_opt(slow.mean_runtime_s, c.record.mean_runtime_s, c.record.accuracy))
    }

    fn save(&self, cp: &Checkpoint) -> Result<(), OrchestratorError> {
        match self.checkpoints {
            Some(store) => store.save(cp),
            None => Ok(()),
        }
    }
}

fn provider_failure(
    p: &Problem,
    slow: ExecutionRecord,
    solutions: Vec<Candidate>,
    trace: Vec<IterationTrace>,
    iteration: usize,
    err: LlmError,
) -> OptimizationResult {
    log::error!("problem {}: {err}", p.id);
    OptimizationResult {
        problem_id: p.id.clone(),
        ranked: final_rerank(&solutions),
        iterations_run: iteration,
        termination: Termination::ProviderFailure,
        slow_public: slow,
        trace,
        provider_error: Some(err.to_string()),
    }
}

/// Runs the search with the built-in templates and no checkpointing.
pub fn optimize<B: LlmBackend + ?Sized>(
    p: &Problem,
    config: &SearchConfig,
    base: &PatternBase,
    backend: &B,
) -> Result<OptimizationResult, OrchestratorError> {
    let templates = PromptTemplates::builtin();
    Optimizer::new(config, base, &templates, backend).optimize(p, None)
}
