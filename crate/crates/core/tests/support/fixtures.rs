//! Hand-traced fixtures. Expected values were worked out by hand from the
//! selection and retrieval rules; they are not produced by the code under test.

use evoperf_core::abstraction::{abstract_code, AbstractedCode, Language, SourceUnit};
use evoperf_core::execution::{CaseResult, CaseStatus, ExecutionRecord, SuiteKind};
use evoperf_core::metrics_report::{JudgedCandidate, ProblemJudgement};
use evoperf_core::pattern_base::{build_pattern_base, PatternBase, TrainingPair};
use evoperf_core::selection::{Candidate, Origin};

pub fn record(accuracy: f64, mean: f64) -> ExecutionRecord {
    ExecutionRecord {
        suite: SuiteKind::Public,
        accuracy,
        mean_runtime_s: mean,
        per_case: vec![CaseResult {
            case_id: "1".into(),
            passed: accuracy >= 1.0,
            runtime_s: mean,
            status: if accuracy >= 1.0 { CaseStatus::Ok } else { CaseStatus::WrongOutput },
            output: None,
        }],
        serialized_timing: true,
    }
}

/// Candidate whose abstraction is the single line `tokens`.
pub fn cand(id: &str, acc: f64, sp: f64, tokens: &str, origin: Origin) -> Candidate {
    Candidate {
        id: id.into(),
        source: SourceUnit::new(format!("# {id}\n"), Language::Python).unwrap(),
        abstraction: AbstractedCode::from_abstract_lines(Language::Python, [tokens]),
        record: record(acc, 1.0 / sp),
        speedup_public: sp,
        distance_sum: 0,
        origin,
    }
}

pub struct SelectionCase {
    pub name: &'static str,
    pub pool: Vec<Candidate>,
    pub n_s: usize,
    pub expected: Vec<&'static str>,
    /// Expected distance sums of the selected members, in output order.
    pub distances: Vec<u64>,
}

pub fn selection_cases() -> Vec<SelectionCase> {
    use Origin::{Iteration, Seed};
    vec![
        // Sorted by speedup: C 3.0, A 2.0, B 1.5. C is incorrect so goes to
        // the incorrect list; only two correct < 3, so C fills the last slot.
        SelectionCase {
            name: "mixed correct and incorrect",
            pool: vec![
                cand("A", 1.0, 2.0, "a", Seed),
                cand("B", 1.0, 1.5, "b", Seed),
                cand("C", 0.0, 3.0, "c", Seed),
            ],
            n_s: 3,
            expected: vec!["A", "B", "C"],
            distances: vec![0, 0, 0],
        },
        // A' has A's abstraction and a lower speedup, so it is skipped.
        SelectionCase {
            name: "abstraction duplicate dropped",
            pool: vec![cand("A", 1.0, 2.0, "x y", Seed), cand("A2", 1.0, 1.8, "x y", Seed)],
            n_s: 2,
            expected: vec!["A"],
            distances: vec![0],
        },
        // One correct < 3. Incorrect token lists X=[p q r], Y=[p q],
        // Z=[z z z z]: d(X,Y)=1, d(X,Z)=4, d(Y,Z)=4, so sums X=5, Y=5, Z=8.
        // X and Y tie; Y is a seed and X comes from iteration 1, so Y first.
        // Z is the fastest program overall but the most distant.
        SelectionCase {
            name: "fewer correct than n_s",
            pool: vec![
                cand("Z", 0.0, 2.0, "z z z z", Seed),
                cand("X", 0.0, 0.5, "p q r", Iteration(1)),
                cand("A", 1.0, 1.3, "a", Seed),
                cand("Y", 0.0, 0.9, "p q", Seed),
            ],
            n_s: 3,
            expected: vec!["A", "Y", "X"],
            distances: vec![0, 5, 5],
        },
        // P=[a b c], Q=[a b c d], R=[x]: d(P,Q)=1, d(P,R)=3, d(Q,R)=4,
        // sums P=4, Q=5, R=7.
        SelectionCase {
            name: "all incorrect",
            pool: vec![
                cand("R", 0.0, 5.0, "x", Seed),
                cand("Q", 0.0, 1.0, "a b c d", Seed),
                cand("P", 0.0, 0.2, "a b c", Seed),
            ],
            n_s: 3,
            expected: vec!["P", "Q", "R"],
            distances: vec![4, 5, 7],
        },
        // Equal speedups: seed before iteration 1 before iteration 2, and
        // between the two iteration-2 candidates the earlier pool entry wins.
        SelectionCase {
            name: "speedup ties",
            pool: vec![
                cand("late_b", 1.0, 2.0, "d", Iteration(2)),
                cand("late_a", 1.0, 2.0, "c", Iteration(2)),
                cand("early", 1.0, 2.0, "b", Iteration(1)),
                cand("seed", 1.0, 2.0, "a", Seed),
            ],
            n_s: 3,
            expected: vec!["seed", "early", "late_b"],
            distances: vec![0, 0, 0],
        },
        // Three distinct correct candidates fill n_s; the incorrect ones are
        // never scored.
        SelectionCase {
            name: "enough correct",
            pool: vec![
                cand("X", 0.0, 9.0, "x x x", Seed),
                cand("C", 1.0, 1.2, "c", Seed),
                cand("A", 1.0, 2.0, "a", Seed),
                cand("B", 1.0, 1.5, "b", Seed),
                cand("Y", 0.0, 9.0, "y", Seed),
            ],
            n_s: 3,
            expected: vec!["A", "B", "C"],
            distances: vec![0, 0, 0],
        },
    ]
}

/// Pools with their full hand-derived final ranking.
pub fn rerank_cases() -> Vec<(&'static str, Vec<Candidate>, Vec<&'static str>)> {
    use Origin::{Iteration, Seed};
    vec![
        // Correct by speedup (A, B), incorrect by distance (single one: C),
        // then the duplicate A2 at the tail.
        (
            "full ordering",
            vec![
                cand("A2", 1.0, 1.9, "x y", Iteration(1)),
                cand("C", 0.0, 3.0, "c", Seed),
                cand("B", 1.0, 1.5, "b", Seed),
                cand("A", 1.0, 2.0, "x y", Seed),
            ],
            vec!["A", "B", "C", "A2"],
        ),
        (
            "equal speedup prefers earlier origin",
            vec![cand("late", 1.0, 2.0, "a", Iteration(2)), cand("early", 1.0, 2.0, "b", Iteration(1))],
            vec!["early", "late"],
        ),
        (
            "all incorrect ascending distance",
            vec![
                cand("R", 0.0, 5.0, "x", Seed),
                cand("Q", 0.0, 1.0, "a b c d", Seed),
                cand("P", 0.0, 0.2, "a b c", Seed),
            ],
            vec!["P", "Q", "R"],
        ),
    ]
}

fn py(s: &str) -> SourceUnit {
    SourceUnit::new(s, Language::Python).unwrap()
}

/// Three patterns on the same slow program whose edits differ only in the
/// call wrapped around the printed value, and two representatives that
/// reproduce the edits of patterns 0 and 1 exactly.
///
/// After normalization every added-statement document has three tokens, so
/// every tf=1 match scores exactly its idf: ln(8/7) for terms in all three
/// documents and ln(8/3) for terms in one. With c = 2 ln(8/7) and
/// h = ln(8/3) / 2:
///
/// - rep 0 (sorted): score_opt = [c+h, c, c], inverted [0, h, h]
/// - rep 1 (len):    score_opt = [c, c+h, c], inverted [h, 0, h]
/// - sim = [2c+h, 2c+h, 2c], dif = [h, h, 2h], input equal for all
///
/// so similar = 0 (tie with 1, lowest id wins) and different = 2.
pub struct RetrievalTrace {
    pub base: PatternBase,
    pub slow: AbstractedCode,
    pub reps: Vec<AbstractedCode>,
    pub similar: usize,
    pub different: usize,
    pub c: f64,
    pub h: f64,
}

pub fn retrieval_trace() -> RetrievalTrace {
    let slow = "a = input()\nprint(a)\n";
    let pairs: Vec<TrainingPair> = [
        ("sorted", "a = input()\nprint(sorted(a))\n"),
        ("len", "a = input()\nprint(len(a))\n"),
        ("upper", "a = input()\nprint(a.upper())\n"),
    ]
    .iter()
    .map(|(id, fast)| TrainingPair {
        problem_id: id.to_string(),
        slow: py(slow),
        fast: py(fast),
    })
    .collect();
    RetrievalTrace {
        base: build_pattern_base(&pairs).unwrap(),
        slow: abstract_code(&py("b = input()\nprint(b)\n")),
        reps: vec![
            abstract_code(&py("b = input()\nprint(sorted(b))\n")),
            abstract_code(&py("b = input()\nprint(len(b))\n")),
        ],
        similar: 0,
        different: 2,
        c: 2.0 * (8.0f64 / 7.0).ln(),
        h: (8.0f64 / 3.0).ln() / 2.0,
    }
}

/// Two problems: A's best candidate is correct and twice as fast as the slow
/// program, B only has an incorrect candidate. By hand: SP@1 = (2.0 + 1.0) / 2
/// = 150.00 percent and OPT@1 = 1 / 2 = 50.00 percent.
pub fn two_problem_judgements() -> Vec<ProblemJudgement<f64>> {
    vec![
        ProblemJudgement {
            problem_id: "A".into(),
            slow_runtime_s: 2.0,
            human_runtime_s: None,
            candidates: vec![JudgedCandidate::judge("a0", 1.0, 1.0, 2.0, None)],
        },
        ProblemJudgement {
            problem_id: "B".into(),
            slow_runtime_s: 1.0,
            human_runtime_s: None,
            candidates: vec![JudgedCandidate::judge("b0", 0.5, 0.5, 1.0, None)],
        },
    ]
}
