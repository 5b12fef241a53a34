use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use evoperf_core::abstraction::{Language, SourceUnit};
use evoperf_core::execution::{run_candidate, RunnerConfig};
use evoperf_core::llm_backend::{
    ApiKey, CompletionBatch, CompletionRequest, HttpBackend, LlmBackend, LlmError, RecordingBackend, ReplayBackend,
};
use evoperf_core::metrics_report::{aggregate, JudgedCandidate, ProblemJudgement};
use evoperf_core::orchestrator::{load_problems, CheckpointStore, Optimizer, Problem, SuiteRequirement, Termination};
use evoperf_core::pattern_base::{build_pattern_base, read_corpus, PatternBase};
use evoperf_core::prompting::PromptTemplates;
use evoperf_core::{Report, Score};

use crate::artifacts::{self, ResultFile};
use crate::config::Config;
use crate::manifest::{self, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0:#}")]
    Input(anyhow::Error),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("{0:#}")]
    Internal(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Input(e)
    }
}

fn internal(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Internal(e.into())
}

pub struct Global {
    pub config: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

impl Global {
    fn load_config(&self) -> anyhow::Result<Config> {
        let mut cfg = Config::load(self.config.as_deref())?;
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.jobs = cfg.jobs.max(1);
        Ok(cfg)
    }
}

/// Applies `f` to every item on up to `jobs` threads; results keep input order.
fn run_pool<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every slot filled"))
        .collect()
}

pub fn build_base(corpus: &Path, out: &Path, language: Option<Language>) -> Result<(), CliError> {
    let pairs = read_corpus(corpus).with_context(|| format!("corpus {}", corpus.display()))?;
    let base = build_pattern_base(&pairs).with_context(|| format!("corpus {}", corpus.display()))?;
    if let Some(lang) = language {
        if base.language != lang {
            return Err(anyhow!("corpus is {}, expected {lang}", base.language).into());
        }
    }
    base.save(out).map_err(internal)?;
    println!(
        "pattern base {}: {} patterns, {} pairs dropped, {} degraded",
        out.display(),
        base.len(),
        base.dropped,
        base.degraded
    );
    Ok(())
}

pub struct OptimizeInputs {
    pub problems: PathBuf,
    pub base: PathBuf,
    pub out: PathBuf,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub resume: bool,
    pub seeds: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct SeedRecord {
    problem_id: String,
    code: String,
}

fn read_seeds(path: &Path, problems: &[Problem]) -> anyhow::Result<HashMap<String, Vec<SourceUnit>>> {
    let lang: HashMap<&str, Language> = problems.iter().map(|p| (p.id.as_str(), p.language())).collect();
    let file = std::fs::File::open(path).with_context(|| format!("reading seeds {}", path.display()))?;
    let mut out: HashMap<String, Vec<SourceUnit>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SeedRecord = serde_json::from_str(&line).with_context(|| format!("seeds line {}", i + 1))?;
        let Some(&language) = lang.get(rec.problem_id.as_str()) else {
            bail!("seeds line {}: unknown problem `{}`", i + 1, rec.problem_id);
        };
        let unit = SourceUnit::new(rec.code, language).with_context(|| format!("seeds line {}", i + 1))?;
        out.entry(rec.problem_id).or_default().push(unit);
    }
    Ok(out)
}

fn load_templates(cfg: &Config) -> anyhow::Result<PromptTemplates> {
    match &cfg.templates {
        Some(p) => PromptTemplates::load(p).with_context(|| format!("templates {}", p.display())),
        None => Ok(PromptTemplates::builtin()),
    }
}

fn make_backend(cfg: &Config, args: &OptimizeInputs) -> anyhow::Result<Box<dyn LlmBackend>> {
    if let Some(path) = &args.replay {
        return Ok(Box::new(ReplayBackend::open(path)?));
    }
    let key = ApiKey::from_env(&cfg.api_key_env)?;
    let live = HttpBackend::new(cfg.http(), key)?;
    Ok(match &args.record {
        Some(path) => Box::new(RecordingBackend::create(live, path)?),
        None => Box::new(live),
    })
}

/// Counts completions requested through it.
struct Counting {
    inner: Box<dyn LlmBackend>,
    calls: AtomicUsize,
}

impl LlmBackend for Counting {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionBatch, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }
}

enum Outcome {
    Skipped,
    Done(Termination),
    Failed(String),
}

pub fn optimize(global: &Global, args: &OptimizeInputs) -> Result<(), CliError> {
    let cfg = global.load_config()?;
    let templates = load_templates(&cfg)?;
    let problems = load_problems(&args.problems, SuiteRequirement::PublicOnly).map_err(anyhow::Error::from)?;
    let base = PatternBase::load(&args.base).with_context(|| format!("pattern base {}", args.base.display()))?;
    for p in &problems {
        if p.language() != base.language {
            return Err(anyhow!("problem {} is {}, pattern base is {}", p.id, p.language(), base.language).into());
        }
    }
    let seeds = args.seeds.as_deref().map(|s| read_seeds(s, &problems)).transpose()?;
    let backend = Counting {
        inner: make_backend(&cfg, args)?,
        calls: AtomicUsize::new(0),
    };

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut inputs = vec![("problems", args.problems.as_path()), ("base", args.base.as_path())];
    if let Some(s) = &args.seeds {
        inputs.push(("seeds", s.as_path()));
    }
    let cassette = args.replay.as_deref().or(args.record.as_deref());
    let mut manifest = RunManifest::new(manifest::core("optimize", &cfg, &inputs, cassette, templates.version()));
    let manifest_path = args.out.join("manifest.json");
    manifest.write(&manifest_path).map_err(internal)?;

    let store = CheckpointStore::new(args.out.join("checkpoints"));
    let optimizer = Optimizer::new(&cfg.search, &base, &templates, &backend).with_checkpoints(&store);
    let outcomes = run_pool(&problems, cfg.jobs, |p| -> Outcome {
        let result_path = artifacts::result_path(&args.out, &p.id);
        if args.resume {
            if let Ok(prev) = artifacts::read_json::<ResultFile>(&result_path) {
                if prev.termination != Termination::ProviderFailure {
                    log::info!("problem {}: already finished", p.id);
                    return Outcome::Skipped;
                }
            }
        } else if let Err(e) = store.remove(&p.id) {
            return Outcome::Failed(e.to_string());
        }
        let injected = seeds.as_ref().map(|s| s.get(&p.id).map(Vec::as_slice).unwrap_or(&[]));
        match optimizer.optimize(p, injected) {
            Ok(r) => {
                let (result, timing) = artifacts::split(&r, p.language(), &manifest.hash);
                let written = artifacts::write_json(&result_path, &result)
                    .and_then(|_| artifacts::write_json(&artifacts::measurement_path(&args.out, &p.id), &timing));
                match written {
                    Ok(()) => Outcome::Done(r.termination),
                    Err(e) => Outcome::Failed(format!("{e:#}")),
                }
            }
            Err(e) => Outcome::Failed(format!("problem {}: {e}", p.id)),
        }
    });
    manifest.finish();
    manifest.write(&manifest_path).map_err(internal)?;

    let mut provider_failures = Vec::new();
    let mut failures = Vec::new();
    for (p, o) in problems.iter().zip(&outcomes) {
        match o {
            Outcome::Skipped => println!("{:<24} skipped (finished earlier)", p.id),
            Outcome::Done(t) => {
                println!("{:<24} {}", p.id, serde_json::to_string(t).unwrap_or_default().trim_matches('"'));
                if *t == Termination::ProviderFailure {
                    provider_failures.push(p.id.clone());
                }
            }
            Outcome::Failed(msg) => failures.push(msg.clone()),
        }
    }
    println!("completion requests: {}", backend.calls.load(Ordering::SeqCst));
    if !failures.is_empty() {
        return Err(internal(anyhow!(failures.join("; "))));
    }
    if !provider_failures.is_empty() {
        return Err(CliError::Provider(format!(
            "problems {} stopped early; rerun with --resume",
            provider_failures.join(", ")
        )));
    }
    Ok(())
}

/// What `evaluate` writes.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub manifest: RunManifest,
    pub report: Report,
    pub judgements: Vec<ProblemJudgement<Score>>,
}

fn judge_problem(p: &Problem, result: &ResultFile, max_k: usize, runner: &RunnerConfig) -> anyhow::Result<ProblemJudgement<Score>> {
    let private = p.private_suite.as_ref().ok_or_else(|| anyhow!("problem {} has no private suite", p.id))?;
    let slow = run_candidate(&p.slow, private, runner)?;
    let human = p
        .human_fast
        .as_ref()
        .map(|h| run_candidate(h, private, runner))
        .transpose()?
        .map(|r| r.mean_runtime_s);
    let mut candidates = Vec::new();
    for entry in result.ranked.iter().take(max_k) {
        let src = SourceUnit::new(entry.code.as_str(), p.language())?;
        let rec = run_candidate(&src, private, runner)?;
        candidates.push(JudgedCandidate::judge(
            entry.id.clone(),
            rec.accuracy,
            rec.mean_runtime_s,
            slow.mean_runtime_s,
            human,
        ));
    }
    Ok(ProblemJudgement {
        problem_id: p.id.clone(),
        slow_runtime_s: slow.mean_runtime_s,
        human_runtime_s: human,
        candidates,
    })
}

pub fn evaluate(global: &Global, results: &Path, problems_path: &Path, out: &Path, k: &[usize], levels: bool) -> Result<(), CliError> {
    let cfg = global.load_config()?;
    let k_values: Vec<usize> = k.iter().copied().filter(|&k| k > 0).collect();
    if k_values.is_empty() {
        return Err(anyhow!("--k needs at least one positive cutoff").into());
    }
    let files = artifacts::read_results(results)?;
    if files.is_empty() {
        return Err(anyhow!("no result files in {}", results.display()).into());
    }
    let problems = load_problems(problems_path, SuiteRequirement::Both).map_err(anyhow::Error::from)?;
    let by_id: HashMap<&str, &Problem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut pairs = Vec::new();
    for f in &files {
        let p = by_id
            .get(f.problem_id.as_str())
            .ok_or_else(|| anyhow!("result for unknown problem `{}`", f.problem_id))?;
        pairs.push((*p, f));
    }
    let max_k = *k_values.iter().max().expect("non-empty");
    let judged = run_pool(&pairs, cfg.jobs, |(p, f)| judge_problem(p, f, max_k, &cfg.search.runner));
    let judgements = judged.into_iter().collect::<anyhow::Result<Vec<_>>>().map_err(internal)?;
    let report = aggregate(&judgements, &k_values);

    let mut manifest = RunManifest::new(manifest::core(
        "evaluate",
        &cfg,
        &[("results", results), ("problems", problems_path)],
        None,
        "",
    ));
    manifest.finish();
    let file = EvaluationFile {
        manifest,
        report,
        judgements,
    };
    artifacts::write_json(out, &file).map_err(internal)?;
    print!("{}", file.report.render_table(levels));
    Ok(())
}

fn search_summary(files: &[ResultFile]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:<16} {:>5} {:>6}  {:<12} {:>8}", "problem", "termination", "iters", "cands", "best", "pub_acc");
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for f in files {
        let term = serde_json::to_string(&f.termination).unwrap_or_default().trim_matches('"').to_string();
        let (best, acc) = f
            .ranked
            .first()
            .map(|c| (c.id.as_str(), format!("{:.2}", c.public_accuracy)))
            .unwrap_or(("-", "-".into()));
        let _ = writeln!(
            out,
            "{:<24} {:<16} {:>5} {:>6}  {:<12} {:>8}",
            f.problem_id,
            term,
            f.iterations_run,
            f.ranked.len(),
            best,
            acc
        );
        *counts.entry(term).or_default() += 1;
    }
    let totals: Vec<String> = counts.iter().map(|(t, n)| format!("{t}={n}")).collect();
    let _ = writeln!(out, "problems: {} ({})", files.len(), totals.join(", "));
    out
}

pub fn report(results: Option<&Path>, eval: Option<&Path>, k: Option<&[usize]>, levels: bool, out: Option<&Path>) -> Result<(), CliError> {
    let text = match (results, eval) {
        (Some(dir), _) => {
            let files = artifacts::read_results(dir)?;
            if files.is_empty() {
                return Err(anyhow!("no result files in {}", dir.display()).into());
            }
            search_summary(&files)
        }
        (None, Some(path)) => {
            let file: EvaluationFile = artifacts::read_json(path)?;
            let report = match k {
                Some(ks) => aggregate(&file.judgements, ks),
                None => file.report,
            };
            report.render_table(levels)
        }
        (None, None) => return Err(anyhow!("pass --results or --eval").into()),
    };
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display())).map_err(internal)?;
    }
    Ok(())
}
