//! OPT@k, SP@k and the NC/NO/NH/FH level taxonomy, computed on private-suite
//! timings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// A candidate is optimized when it is fully correct and more than 10%
/// faster: (T(s) - T(o)) / T(o) > 0.10, evaluated as T(s) / T(o) > 1.1 so the
/// boundary case is decided on the same quotient as [`sp_contribution`].
pub fn qualifies_opt<T: Scalar>(slow_t: T, opt_t: T, acc: T) -> bool {
    if !(slow_t > T::zero() && opt_t > T::zero()) {
        return false;
    }
    acc >= T::one() && slow_t / opt_t > T::of(1.1)
}

/// Per-problem speedup: T(s)/T(o) for a correct candidate that is not
/// slower than the slow program, otherwise 1.
pub fn sp_contribution<T: Scalar>(slow_t: T, cand_t: T, acc: T) -> T {
    if acc >= T::one() && cand_t > T::zero() && cand_t <= slow_t {
        slow_t / cand_t
    } else {
        T::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    /// Not correct.
    NC,
    /// Correct but not optimized.
    NO,
    /// Optimized, but not faster than the human reference.
    NH,
    /// More than 10% faster than the human reference.
    FH,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::NC, Level::NO, Level::NH, Level::FH];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::NC => "NC",
            Level::NO => "NO",
            Level::NH => "NH",
            Level::FH => "FH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub level: Level,
    /// The candidate was optimized but no human reference time was available,
    /// so it could not be tested for FH and was capped at NH.
    pub missing_reference: bool,
}

pub fn classify_level<T: Scalar>(acc: T, opt_t: T, slow_t: T, human_t: Option<T>) -> Classification {
    let level = if acc < T::one() {
        Level::NC
    } else if !qualifies_opt(slow_t, opt_t, acc) {
        Level::NO
    } else {
        return match human_t {
            Some(h) if qualifies_opt(h, opt_t, acc) => Classification {
                level: Level::FH,
                missing_reference: false,
            },
            Some(_) => Classification {
                level: Level::NH,
                missing_reference: false,
            },
            None => Classification {
                level: Level::NH,
                missing_reference: true,
            },
        };
    };
    Classification {
        level,
        missing_reference: false,
    }
}

/// One ranked candidate judged on the private suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedCandidate<T> {
    pub candidate_id: String,
    pub accuracy: T,
    pub runtime_s: T,
    pub speedup: T,
    pub qualifies_opt: bool,
    pub level: Level,
    pub missing_reference: bool,
}

impl<T: Scalar> JudgedCandidate<T> {
    pub fn judge(candidate_id: impl Into<String>, accuracy: T, runtime_s: T, slow_t: T, human_t: Option<T>) -> Self {
        let c = classify_level(accuracy, runtime_s, slow_t, human_t);
        Self {
            candidate_id: candidate_id.into(),
            accuracy,
            runtime_s,
            speedup: sp_contribution(slow_t, runtime_s, accuracy),
            qualifies_opt: qualifies_opt(slow_t, runtime_s, accuracy),
            level: c.level,
            missing_reference: c.missing_reference,
        }
    }
}

/// Private-suite judgement of one problem's ranked solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemJudgement<T> {
    pub problem_id: String,
    pub slow_runtime_s: T,
    pub human_runtime_s: Option<T>,
    /// In rank order.
    pub candidates: Vec<JudgedCandidate<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow<T> {
    pub problem_id: String,
    /// Best top-k speedup contribution per k.
    pub sp_at: BTreeMap<usize, T>,
    pub opt_at: BTreeMap<usize, bool>,
    /// Levels of the ranked candidates, in rank order, up to the largest k.
    pub levels: Vec<Level>,
    pub top_speedups: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub n: usize,
    pub k_values: Vec<usize>,
    pub rows: Vec<ReportRow<T>>,
    /// Percentages.
    pub opt_at: BTreeMap<usize, T>,
    pub sp_at: BTreeMap<usize, T>,
    /// Percentage of problems whose top-1 candidate falls in each level.
    pub top1_levels: BTreeMap<Level, T>,
}

fn percent<T: Scalar>(sum: T, n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        sum / T::of_usize(n) * T::of(100.0)
    }
}

/// SP@k is the best contribution among the top k candidates and OPT@k
/// whether any of them qualifies; both are averaged over problems and
/// reported as percentages. Problems with fewer than k candidates use all of
/// them, and a problem with none contributes a speedup of 1.
pub fn aggregate<T: Scalar>(problems: &[ProblemJudgement<T>], k_values: &[usize]) -> EvalReport<T> {
    let mut ks: Vec<usize> = k_values.iter().copied().filter(|&k| k > 0).collect();
    ks.sort_unstable();
    ks.dedup();
    let max_k = ks.last().copied().unwrap_or(0);

    let mut rows = Vec::with_capacity(problems.len());
    let mut sp_sum: BTreeMap<usize, T> = ks.iter().map(|&k| (k, T::zero())).collect();
    let mut opt_sum: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
    let mut level_count: BTreeMap<Level, usize> = Level::ALL.iter().map(|&l| (l, 0)).collect();

    for p in problems {
        let mut row = ReportRow {
            problem_id: p.problem_id.clone(),
            sp_at: BTreeMap::new(),
            opt_at: BTreeMap::new(),
            levels: p.candidates.iter().take(max_k).map(|c| c.level).collect(),
            top_speedups: p.candidates.iter().take(max_k).map(|c| c.speedup).collect(),
        };
        for &k in &ks {
            let top = &p.candidates[..k.min(p.candidates.len())];
            let sp = top.iter().map(|c| c.speedup).fold(T::one(), T::max);
            let opt = top.iter().any(|c| c.qualifies_opt);
            row.sp_at.insert(k, sp);
            row.opt_at.insert(k, opt);
            *sp_sum.get_mut(&k).expect("k present") = sp_sum[&k] + sp;
            *opt_sum.get_mut(&k).expect("k present") += usize::from(opt);
        }
        let top1 = p.candidates.first().map_or(Level::NC, |c| c.level);
        *level_count.get_mut(&top1).expect("level present") += 1;
        rows.push(row);
    }

    let n = problems.len();
    EvalReport {
        n,
        k_values: ks.clone(),
        rows,
        opt_at: opt_sum.into_iter().map(|(k, c)| (k, percent(T::of_usize(c), n))).collect(),
        sp_at: sp_sum.into_iter().map(|(k, s)| (k, percent(s, n))).collect(),
        top1_levels: level_count.into_iter().map(|(l, c)| (l, percent(T::of_usize(c), n))).collect(),
    }
}

impl<T: Scalar> EvalReport<T> {
    /// Plain-text table: one line per problem, then the aggregates.
    pub fn render_table(&self, with_levels: bool) -> String {
        let mut out = String::new();
        let mut header = format!("{:<24}", "problem");
        for k in &self.k_values {
            let _ = write!(header, " {:>9} {:>6}", format!("SP@{k}"), format!("OPT@{k}"));
        }
        if with_levels {
            header.push_str("  levels");
        }
        out.push_str(header.trim_end());
        out.push('\n');
        for row in &self.rows {
            let mut line = format!("{:<24}", row.problem_id);
            for k in &self.k_values {
                let opt = if row.opt_at[k] { "yes" } else { "no" };
                let _ = write!(line, " {:>9.2} {:>6}", row.sp_at[k].to_f64_lossy(), opt);
            }
            if with_levels {
                let levels: Vec<&str> = row.levels.iter().map(|l| l.as_str()).collect();
                let _ = write!(line, "  {}", levels.join(","));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        let mut total = format!("{:<24}", format!("mean (n={})", self.n));
        for k in &self.k_values {
            let _ = write!(
                total,
                " {:>8.2}% {:>5.2}%",
                self.sp_at[k].to_f64_lossy(),
                self.opt_at[k].to_f64_lossy()
            );
        }
        out.push_str(total.trim_end());
        out.push('\n');
        if with_levels {
            let parts: Vec<String> = self
                .top1_levels
                .iter()
                .map(|(l, v)| format!("{} {:.2}%", l.as_str(), v.to_f64_lossy()))
                .collect();
            let _ = writeln!(out, "top-1 levels: {}", parts.join("  "));
        }
        out
    }
}
