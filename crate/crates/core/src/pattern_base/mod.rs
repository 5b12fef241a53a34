//! Mined optimization patterns and adaptive retrieval.
//!
//! Every training pair (slow, fast) is abstracted and diffed. Three BM25
//! indexes are kept: over the abstracted slow programs, over the deleted
//! statements and over the added statements. Retrieval scores each pattern
//! against the current slow program and against the edits the representatives
//! already made, then returns the most similar and the most different pattern.

mod bm25;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_code, extract_diff, AbstractedCode, DiffParts, Language, SourceUnit};
use crate::num::Scalar;

pub use bm25::{normalize_tokens, Bm25Index, Bm25Params, ScoreVector};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern base is empty")]
    EmptyBase,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("training pairs mix languages: {0} and {1}")]
    UnmixedLanguages(Language, Language),
    #[error("corpus line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("unsupported pattern base format version {found} (expected {FORMAT_VERSION})")]
    FormatVersion { found: u32 },
    #[error("corrupt pattern base: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One line of the training corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub problem_id: String,
    pub slow_code: String,
    pub fast_code: String,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub problem_id: String,
    pub slow: SourceUnit,
    pub fast: SourceUnit,
}

impl TryFrom<CorpusRecord> for TrainingPair {
    type Error = crate::abstraction::AbstractionError;

    fn try_from(r: CorpusRecord) -> Result<Self, Self::Error> {
        Ok(Self {
            slow: SourceUnit::new(r.slow_code, r.language)?,
            fast: SourceUnit::new(r.fast_code, r.language)?,
            problem_id: r.problem_id,
        })
    }
}

/// Reads a line-delimited JSON corpus. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn read_corpus(path: &Path) -> Result<Vec<TrainingPair>, PatternError> {
    let io_err = |source| PatternError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| PatternError::MalformedRecord { line: i + 1, message };
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        pairs.push(TrainingPair::try_from(record).map_err(|e| malformed(e.to_string()))?);
    }
    if pairs.is_empty() {
        return Err(PatternError::EmptyCorpus);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub id: usize,
    pub problem_id: String,
    pub slow_abs: AbstractedCode,
    pub fast_abs: AbstractedCode,
    pub deleted: Vec<String>,
    pub added: Vec<String>,
    pub raw_slow: SourceUnit,
    pub raw_fast: SourceUnit,
}

impl Pattern {
    pub fn degraded(&self) -> bool {
        self.slow_abs.degraded || self.fast_abs.degraded
    }

    pub fn diff(&self) -> DiffParts {
        DiffParts {
            deleted: self.deleted.clone(),
            added: self.added.clone(),
        }
    }
}

fn line_tokens(lines: &[String]) -> Vec<String> {
    let tokens: Vec<&str> = lines.iter().flat_map(|l| l.split_whitespace()).collect();
    normalize_tokens(&tokens)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternBase {
    pub format_version: u32,
    pub language: Language,
    pub patterns: Vec<Pattern>,
    /// Pairs dropped because slow and fast abstracted identically.
    pub dropped: usize,
    /// Patterns whose abstraction fell back to plain tokenization.
    pub degraded: usize,
    slow_index: Bm25Index,
    deleted_index: Bm25Index,
    added_index: Bm25Index,
}

/// Mines `pairs` into a pattern base. Pairs whose abstractions are identical
/// carry no edit and are dropped.
pub fn build_pattern_base(pairs: &[TrainingPair]) -> Result<PatternBase, PatternError> {
    let first = pairs.first().ok_or(PatternError::EmptyCorpus)?;
    let language = first.slow.language();
    for p in pairs {
        for unit in [&p.slow, &p.fast] {
            if unit.language() != language {
                return Err(PatternError::UnmixedLanguages(language, unit.language()));
            }
        }
    }

    let mined: Vec<(AbstractedCode, AbstractedCode, DiffParts)> = pairs
        .par_iter()
        .map(|p| {
            let slow = abstract_code(&p.slow);
            let fast = abstract_code(&p.fast);
            let diff = extract_diff(&slow, &fast);
            (slow, fast, diff)
        })
        .collect();

    let mut patterns = Vec::new();
    let mut dropped = 0;
    for (pair, (slow_abs, fast_abs, diff)) in pairs.iter().zip(mined) {
        if diff.is_empty() {
            dropped += 1;
            continue;
        }
        patterns.push(Pattern {
            id: patterns.len(),
            problem_id: pair.problem_id.clone(),
            slow_abs,
            fast_abs,
            deleted: diff.deleted,
            added: diff.added,
            raw_slow: pair.slow.clone(),
            raw_fast: pair.fast.clone(),
        });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} training pairs with identical abstractions");
    }
    Ok(PatternBase::from_patterns(language, patterns, dropped))
}

impl PatternBase {
    fn from_patterns(language: Language, patterns: Vec<Pattern>, dropped: usize) -> Self {
        let slow_index = Bm25Index::build(patterns.iter().map(|p| normalize_tokens(&p.slow_abs.tokens)));
        let deleted_index = Bm25Index::build(patterns.iter().map(|p| line_tokens(&p.deleted)));
        let added_index = Bm25Index::build(patterns.iter().map(|p| line_tokens(&p.added)));
        let degraded = patterns.iter().filter(|p| p.degraded()).count();
        Self {
            format_version: FORMAT_VERSION,
            language,
            patterns,
            dropped,
            degraded,
            slow_index,
            deleted_index,
            added_index,
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn slow_index(&self) -> &Bm25Index {
        &self.slow_index
    }

    pub fn deleted_index(&self) -> &Bm25Index {
        &self.deleted_index
    }

    pub fn added_index(&self) -> &Bm25Index {
        &self.added_index
    }

    pub fn save(&self, path: &Path) -> Result<(), PatternError> {
        let text = serde_json::to_string(self).map_err(|e| PatternError::Corrupt(e.to_string()))?;
        fs::write(path, text).map_err(|source| PatternError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PatternError> {
        let text = fs::read_to_string(path).map_err(|source| PatternError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| PatternError::Corrupt(e.to_string()))?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(PatternError::FormatVersion { found });
        }
        let base: PatternBase = serde_json::from_value(value).map_err(|e| PatternError::Corrupt(e.to_string()))?;
        let n = base.patterns.len();
        for index in [&base.slow_index, &base.deleted_index, &base.added_index] {
            if index.doc_count() != n {
                return Err(PatternError::Corrupt(format!(
                    "index holds {} documents for {n} patterns",
                    index.doc_count()
                )));
            }
        }
        Ok(base)
    }
}

/// Retrieval tuning. Counts default to one similar and one different pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams<T> {
    pub bm25: Bm25Params<T>,
    pub similar: usize,
    pub different: usize,
}

impl<T: Scalar> Default for RetrievalParams<T> {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            similar: 1,
            different: 1,
        }
    }
}

/// Intermediate score vectors of one retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalScores<T> {
    pub input: ScoreVector<T>,
    pub similar: ScoreVector<T>,
    pub different: ScoreVector<T>,
}

impl<T: Scalar> RetrievalScores<T> {
    pub fn similar_total(&self) -> ScoreVector<T> {
        &self.similar + &self.input
    }

    pub fn different_total(&self) -> ScoreVector<T> {
        &self.different + &self.input
    }
}

/// Computes the input, similarity and difference scores of every pattern.
pub fn retrieval_scores<'a, T, I>(slow_abs: &AbstractedCode, reps: I, base: &PatternBase, params: Bm25Params<T>) -> RetrievalScores<T>
where
    T: Scalar,
    I: IntoIterator<Item = &'a AbstractedCode>,
{
    let n = base.len();
    let input = base.slow_index.scores(&normalize_tokens(&slow_abs.tokens), params);
    let mut similar = ScoreVector::zeros(n);
    let mut different = ScoreVector::zeros(n);
    for rep in reps {
        let diff = extract_diff(slow_abs, rep);
        let deleted = base.deleted_index.scores(&line_tokens(&diff.deleted), params);
        let added = base.added_index.scores(&line_tokens(&diff.added), params);
        let score_opt = (&deleted + &added).scale(T::of(0.5));
        different = &different + &score_opt.inverted();
        similar = &similar + &score_opt;
    }
    RetrievalScores { input, similar, different }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedPatterns {
    pub similar: Vec<Pattern>,
    pub different: Vec<Pattern>,
}

impl RetrievedPatterns {
    /// Similar ids followed by different ids.
    pub fn ids(&self) -> Vec<usize> {
        self.similar.iter().chain(&self.different).map(|p| p.id).collect()
    }

    /// True when a pattern was retrieved as both similar and different.
    pub fn coincide(&self) -> bool {
        self.similar.iter().any(|s| self.different.iter().any(|d| d.id == s.id))
    }
}

/// Picks the patterns whose edits resemble the representatives' edits
/// (`similar`) and those whose edits differ most (`different`), both
/// weighted by how close the pattern's slow program is to `slow_abs`.
pub fn retrieve_patterns<'a, T, I>(
    slow_abs: &AbstractedCode,
    reps: I,
    base: &PatternBase,
    params: &RetrievalParams<T>,
) -> Result<RetrievedPatterns, PatternError>
where
    T: Scalar,
    I: IntoIterator<Item = &'a AbstractedCode>,
{
    if base.is_empty() {
        return Err(PatternError::EmptyBase);
    }
    let scores = retrieval_scores(slow_abs, reps, base, params.bm25);
    let pick = |v: ScoreVector<T>, k: usize| -> Vec<Pattern> { v.top(k).into_iter().map(|i| base.patterns[i].clone()).collect() };
    let out = RetrievedPatterns {
        similar: pick(scores.similar_total(), params.similar),
        different: pick(scores.different_total(), params.different),
    };
    if out.coincide() && base.len() > 1 {
        log::debug!("similar and different retrieval returned the same pattern");
    }
    Ok(out)
}
