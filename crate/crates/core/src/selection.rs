//! Fitness-based re-ranking of candidate programs.
//!
//! Fully correct candidates come first, fastest first, with at most one
//! candidate per distinct abstraction. When there are not enough of them,
//! incorrect candidates fill the remaining slots, most central first: each one
//! is scored by the sum of its token edit distances to every other incorrect
//! candidate, and lower sums rank higher.
//!
//! Ties are broken by earlier origin (seed, then iteration 1, 2, ...) and then
//! by position in the input pool, so equal inputs always rank identically.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_code, levenshtein, AbstractedCode, SourceUnit};
use crate::execution::{speedup, ExecutionRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("number of representatives must be at least 1")]
    ZeroRepresentatives,
}

/// Where a candidate came from. Seeds order before every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Origin {
    Seed,
    Iteration(u32),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Seed => f.write_str("seed"),
            Origin::Iteration(i) => write!(f, "iteration_{i}"),
        }
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "seed" {
            return Ok(Origin::Seed);
        }
        s.strip_prefix("iteration_")
            .and_then(|n| n.parse().ok())
            .map(Origin::Iteration)
            .ok_or_else(|| format!("invalid origin `{s}`"))
    }
}

impl From<Origin> for String {
    fn from(o: Origin) -> Self {
        o.to_string()
    }
}

impl TryFrom<String> for Origin {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Stable identity used for representative-set comparison.
    pub id: String,
    pub source: SourceUnit,
    pub abstraction: AbstractedCode,
    /// Public-suite execution record.
    pub record: ExecutionRecord,
    pub speedup_public: f64,
    /// Sum of edit distances to the other incorrect candidates; zero until computed.
    pub distance_sum: u64,
    pub origin: Origin,
}

impl Candidate {
    /// Abstracts `source` and derives the public speedup from `slow_record`.
    pub fn new(
        id: impl Into<String>,
        source: SourceUnit,
        record: ExecutionRecord,
        slow_record: &ExecutionRecord,
        origin: Origin,
    ) -> Self {
        let abstraction = abstract_code(&source);
        let speedup_public = speedup(slow_record, &record);
        Self {
            id: id.into(),
            source,
            abstraction,
            record,
            speedup_public,
            distance_sum: 0,
            origin,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.record.is_fully_correct()
    }
}

/// The candidates carried into the next prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    pub members: Vec<Candidate>,
    pub limit: usize,
}

impl RepresentativeSet {
    pub fn empty(limit: usize) -> Self {
        Self {
            members: Vec::new(),
            limit,
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.members.iter().map(|c| c.id.clone()).collect()
    }

    /// Same candidate identities in the same order.
    pub fn same_identities(&self, other: &RepresentativeSet) -> bool {
        self.members.len() == other.members.len()
            && self.members.iter().zip(&other.members).all(|(a, b)| a.id == b.id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.members.iter()
    }
}

struct Partition {
    correct: Vec<usize>,
    duplicates: Vec<usize>,
    incorrect: Vec<usize>,
    distance: Vec<u64>,
}

fn tie_break(pool: &[Candidate], a: usize, b: usize) -> Ordering {
    pool[a].origin.cmp(&pool[b].origin).then(a.cmp(&b))
}

fn partition(pool: &[Candidate], compute_distances: impl Fn(usize) -> bool) -> Partition {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        pool[b]
            .speedup_public
            .total_cmp(&pool[a].speedup_public)
            .then_with(|| tie_break(pool, a, b))
    });

    let mut correct: Vec<usize> = Vec::new();
    let mut duplicates = Vec::new();
    let mut incorrect = Vec::new();
    for idx in order {
        let cand = &pool[idx];
        if cand.is_correct() {
            let seen = correct
                .iter()
                .any(|&c| pool[c].abstraction.same_abstraction(&cand.abstraction));
            if seen {
                duplicates.push(idx);
            } else {
                correct.push(idx);
            }
        } else {
            incorrect.push(idx);
        }
    }

    let mut distance = vec![0u64; pool.len()];
    if compute_distances(correct.len()) {
        for &a in &incorrect {
            distance[a] = incorrect
                .iter()
                .map(|&b| levenshtein(&pool[a].abstraction.tokens, &pool[b].abstraction.tokens) as u64)
                .sum();
        }
        incorrect.sort_by(|&a, &b| distance[a].cmp(&distance[b]).then_with(|| tie_break(pool, a, b)));
    }
    Partition {
        correct,
        duplicates,
        incorrect,
        distance,
    }
}

fn with_distance(pool: &[Candidate], idx: usize, distance: &[u64]) -> Candidate {
    let mut c = pool[idx].clone();
    c.distance_sum = distance[idx];
    c
}

/// Picks up to `n_s` representatives from `pool`.
pub fn select_representatives(pool: &[Candidate], n_s: usize) -> Result<RepresentativeSet, SelectionError> {
    if n_s == 0 {
        return Err(SelectionError::ZeroRepresentatives);
    }
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    let part = partition(pool, |n_correct| n_correct < n_s);
    let members = part
        .correct
        .iter()
        .chain(&part.incorrect)
        .take(n_s)
        .map(|&i| with_distance(pool, i, &part.distance))
        .collect();
    Ok(RepresentativeSet { members, limit: n_s })
}

/// Orders the whole pool with the selection comparator: distinct correct
/// candidates, then incorrect ones by distance sum, then correct candidates
/// whose abstraction duplicates a higher-ranked one.
pub fn final_rerank(pool: &[Candidate]) -> Vec<Candidate> {
    let part = partition(pool, |_| true);
    part.correct
        .iter()
        .chain(&part.incorrect)
        .chain(&part.duplicates)
        .map(|&i| with_distance(pool, i, &part.distance))
        .collect()
}
