//! Randomized property checks. Each returns `Err` with the shrunk
//! counterexample so callers can either assert or report it.

use std::collections::HashSet;

use evoperf_core::abstraction::{abstract_code, levenshtein, token_edit_distance, AbstractedCode, Language, SourceUnit};
use evoperf_core::metrics_report::{aggregate, qualifies_opt, sp_contribution, JudgedCandidate, Level, ProblemJudgement};
use evoperf_core::pattern_base::{Bm25Index, Bm25Params};
use evoperf_core::selection::{select_representatives, Candidate, Origin};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use super::fixtures::cand;
use super::oracles::{brute_bm25, reference_distance};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn finish<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn token_seq(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "VAR_0", "(", ")"]), 0..=max_len)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn code(tokens: Vec<String>) -> AbstractedCode {
    let mut c = AbstractedCode::from_abstract_lines(Language::Python, Vec::<String>::new());
    c.lines = vec![tokens.join(" ")];
    c.tokens = tokens;
    c
}

/// Token edit distance equals the full-matrix reference on random pairs.
pub fn edit_distance_oracle(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&(token_seq(40), token_seq(40)), |(a, b)| {
        prop_assert_eq!(levenshtein(&a, &b), reference_distance(&a, &b));
        Ok(())
    }))
}

/// Identity, symmetry and the triangle inequality on random triples.
pub fn edit_distance_metric(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&(token_seq(40), token_seq(40), token_seq(40)), |(a, b, c)| {
        let (a, b, c) = (code(a), code(b), code(c));
        let ab = token_edit_distance(&a, &b);
        prop_assert_eq!(token_edit_distance(&a, &a), 0);
        prop_assert_eq!(ab, token_edit_distance(&b, &a));
        prop_assert_eq!(ab == 0, a.tokens == b.tokens);
        prop_assert!(token_edit_distance(&a, &c) <= ab + token_edit_distance(&b, &c));
        Ok(())
    }))
}

fn corpus() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<String>)> {
    let vocab = vec!["for", "range", "append", "sum", "var_0", "lit_0", "join", "sort"];
    let doc = prop::collection::vec(prop::sample::select(vocab.clone()), 0..=30)
        .prop_map(|d| d.into_iter().map(String::from).collect::<Vec<_>>());
    let query = prop::collection::vec(prop::sample::select(vocab), 0..8)
        .prop_map(|d| d.into_iter().map(String::from).collect::<Vec<_>>());
    (prop::collection::vec(doc, 1..=20), query)
}

/// Index scores agree with the brute-force formula within 1e-9.
pub fn bm25_oracle(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&corpus(), |(docs, query)| {
        let index = Bm25Index::build(&docs);
        let got = index.scores(&query, Bm25Params::<f64>::default());
        let want = brute_bm25(&query, &docs, 1.2, 0.75);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.values.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9, "{} vs {}", g, w);
            prop_assert!(*g >= 0.0);
        }
        Ok(())
    }))
}

const PY_TEMPLATES: &[&str] = &[
    "def {f}({a}, {b}):\n    {c} = 0\n    for {i} in range({a}):\n        {c} += {i} * {b}\n    return {c}\n\n{n} = int(input())\nprint({f}({n}, 3))\n",
    "import sys\n{d} = sys.stdin.readline().split()\n{s} = ''\nfor {w} in {d}:\n    {s} += {w}\nprint(len({s}), sorted({d}))\n",
    "class {K}:\n    def __init__(self, {v}):\n        self.{v2} = {v}\n    def {m}(self):\n        return self.{m}\n{o} = {K}(5)\nprint([{x} * {x} for {x} in range(10) if {x} % 2])\n",
    "{a}, {b} = map(int, input().split())\n{r} = 0\nwhile {a} > 0:\n    {r} = ({r} + {b}) % 1000000007\n    {a} -= 1\nprint({r})\n",
];

const CPP_TEMPLATES: &[&str] = &[
    "#include <bits/stdc++.h>\nusing namespace std;\nlong long {f}(long long {a}, long long {b}) {\n  long long {c} = 0;\n  for (long long {i} = 0; {i} < {a}; ++{i}) {c} += {i} * {b};\n  return {c};\n}\nint main() {\n  long long {n};\n  cin >> {n};\n  cout << {f}({n}, 3) << endl;\n}\n",
    "#include <cstdio>\nstruct {K} { int {x}; int {y}; };\nint main() {\n  {K} {p};\n  {p}.{x} = 1; {p}.{y} = 2;\n  int {arr}[10] = {0};\n  for (auto &{e} : {arr}) {e} += {p}.{x};\n  printf(\"%d\\n\", {arr}[3] + {p}.{y});\n  return 0;\n}\n",
];

const PY_SLOTS: &[&str] = &["f", "a", "b", "c", "i", "n", "d", "s", "w", "K", "v", "v2", "m", "o", "x", "r"];
const CPP_SLOTS: &[&str] = &["f", "a", "b", "c", "i", "n", "K", "x", "y", "p", "arr", "e"];

fn fill(template: &str, names: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (slot, name) in names {
        out = out.replace(&format!("{{{slot}}}"), name);
    }
    out
}

fn fresh_names(count: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::hash_set("zz[a-z][a-z0-9_]{0,6}", count)
        .prop_map(|set| {
            let mut v: Vec<String> = set.into_iter().collect();
            v.sort();
            v
        })
        .prop_shuffle()
}

/// Consistent renaming of user identifiers leaves the abstraction unchanged.
pub fn alpha_invariance(language: Language, cases: u32) -> Result<(), String> {
    let (templates, slots) = match language {
        Language::Python => (PY_TEMPLATES, PY_SLOTS),
        Language::Cpp => (CPP_TEMPLATES, CPP_SLOTS),
    };
    let baseline_names: Vec<(&str, String)> = slots.iter().map(|s| (*s, format!("orig_{s}"))).collect();
    let baselines: Vec<AbstractedCode> = templates
        .iter()
        .map(|t| abstract_code(&SourceUnit::new(fill(t, &baseline_names), language).unwrap()))
        .collect();
    finish(runner(cases).run(&fresh_names(slots.len()), |names| {
        let renamed: Vec<(&str, String)> = slots.iter().copied().zip(names).collect();
        for (t, base) in templates.iter().zip(&baselines) {
            let got = abstract_code(&SourceUnit::new(fill(t, &renamed), language).unwrap());
            prop_assert_eq!(&got, base);
        }
        Ok(())
    }))
}

pub fn arb_pool() -> impl Strategy<Value = Vec<Candidate>> {
    let one = (
        prop::sample::select(vec![0.0, 0.5, 1.0, 1.0]),
        prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]),
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..4),
        prop::option::of(1u32..4),
    );
    prop::collection::vec(one, 1..12).prop_map(|items| {
        items
            .into_iter()
            .enumerate()
            .map(|(i, (acc, sp, toks, it))| {
                let origin = it.map_or(Origin::Seed, Origin::Iteration);
                cand(&format!("c{i}"), acc, sp, &toks.join(" "), origin)
            })
            .collect()
    })
}

/// Correct before incorrect, fastest first, no duplicate abstractions among
/// correct members, size at most N_s, incorrect members by ascending
/// reference distance sums, and a deterministic result.
pub fn representative_invariants(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&(arb_pool(), 1usize..6), |(pool, n_s)| {
        let rs = select_representatives(&pool, n_s).unwrap();
        let m = &rs.members;
        prop_assert!(m.len() <= n_s && m.len() <= pool.len());

        let pool_ids: HashSet<&str> = pool.iter().map(|c| c.id.as_str()).collect();
        let out_ids: HashSet<&str> = m.iter().map(|c| c.id.as_str()).collect();
        prop_assert_eq!(out_ids.len(), m.len());
        prop_assert!(out_ids.is_subset(&pool_ids));

        let first_incorrect = m.iter().position(|c| !c.is_correct()).unwrap_or(m.len());
        prop_assert!(m[first_incorrect..].iter().all(|c| !c.is_correct()));
        let correct = &m[..first_incorrect];
        prop_assert!(correct.windows(2).all(|w| w[0].speedup_public >= w[1].speedup_public));
        let distinct: HashSet<String> = correct.iter().map(|c| c.abstraction.canonical_text()).collect();
        prop_assert_eq!(distinct.len(), correct.len());

        let all_distinct_correct: HashSet<String> = pool
            .iter()
            .filter(|c| c.is_correct())
            .map(|c| c.abstraction.canonical_text())
            .collect();
        let n_incorrect = pool.iter().filter(|c| !c.is_correct()).count();
        prop_assert_eq!(m.len(), n_s.min(all_distinct_correct.len() + n_incorrect));
        if all_distinct_correct.len() >= n_s {
            prop_assert_eq!(first_incorrect, m.len());
        } else {
            prop_assert_eq!(correct.len(), all_distinct_correct.len());
            let incorrect: Vec<&Candidate> = pool.iter().filter(|c| !c.is_correct()).collect();
            for c in &m[first_incorrect..] {
                let expected: usize = incorrect
                    .iter()
                    .map(|o| reference_distance(&c.abstraction.tokens, &o.abstraction.tokens))
                    .sum();
                prop_assert_eq!(c.distance_sum, expected as u64);
            }
            prop_assert!(m[first_incorrect..].windows(2).all(|w| w[0].distance_sum <= w[1].distance_sum));
        }

        let again = select_representatives(&pool, n_s).unwrap();
        prop_assert_eq!(&rs, &again);
        Ok(())
    }))
}

fn arb_judgements() -> impl Strategy<Value = Vec<ProblemJudgement<f64>>> {
    let cand = (prop::sample::select(vec![0.0, 0.5, 1.0, 1.0, 1.0]), 0.01f64..6.0);
    let problem = (0.1f64..5.0, prop::option::of(0.01f64..5.0), prop::collection::vec(cand, 0..7));
    prop::collection::vec(problem, 1..8).prop_map(|ps| {
        ps.into_iter()
            .enumerate()
            .map(|(i, (slow, human, cands))| ProblemJudgement {
                problem_id: format!("p{i}"),
                slow_runtime_s: slow,
                human_runtime_s: human,
                candidates: cands
                    .into_iter()
                    .enumerate()
                    .map(|(j, (acc, t))| JudgedCandidate::judge(format!("c{j}"), acc, t, slow, human))
                    .collect(),
            })
            .collect()
    })
}

/// The level of a judged candidate, from the definitions alone: each level
/// is tested separately so a candidate matching two would show up.
fn oracle_levels(acc: f64, t: f64, slow: f64, human: Option<f64>) -> Vec<Level> {
    let correct = acc == 1.0;
    let optimized = correct && slow / t > 1.1;
    let beats_human = human.is_some_and(|h| h / t > 1.1);
    let mut out = Vec::new();
    if !correct {
        out.push(Level::NC);
    }
    if correct && !optimized {
        out.push(Level::NO);
    }
    if optimized && !beats_human {
        out.push(Level::NH);
    }
    if optimized && beats_human {
        out.push(Level::FH);
    }
    out
}

/// Every judged candidate lands in exactly one level, the one the
/// definitions give, and OPT qualification implies a contribution above 1.1.
pub fn levels_partition(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&arb_judgements(), |problems| {
        for p in &problems {
            for c in &p.candidates {
                let want = oracle_levels(c.accuracy, c.runtime_s, p.slow_runtime_s, p.human_runtime_s);
                prop_assert_eq!(want.len(), 1);
                prop_assert_eq!(c.level, want[0]);
                if qualifies_opt(p.slow_runtime_s, c.runtime_s, c.accuracy) {
                    prop_assert!(sp_contribution(p.slow_runtime_s, c.runtime_s, c.accuracy) > 1.1);
                }
            }
        }
        Ok(())
    }))
}

/// SP@k and OPT@k never decrease with k, per problem and in aggregate, and
/// SP@k never drops below 100.
pub fn report_monotonicity(cases: u32) -> Result<(), String> {
    let ks = [1usize, 2, 3, 5, 8];
    finish(runner(cases).run(&arb_judgements(), |problems| {
        let r = aggregate(&problems, &ks);
        for w in ks.windows(2) {
            prop_assert!(r.sp_at[&w[0]] <= r.sp_at[&w[1]]);
            prop_assert!(r.opt_at[&w[0]] <= r.opt_at[&w[1]]);
            for row in &r.rows {
                prop_assert!(row.sp_at[&w[0]] <= row.sp_at[&w[1]]);
                prop_assert!(row.opt_at[&w[0]] <= row.opt_at[&w[1]]);
            }
        }
        for k in ks {
            prop_assert!(r.sp_at[&k] >= 100.0);
            prop_assert!((0.0..=100.0).contains(&r.opt_at[&k]));
        }
        Ok(())
    }))
}
