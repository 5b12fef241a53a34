use std::collections::HashSet;
use std::path::PathBuf;

use evoperf_core::abstraction::{Language, SourceUnit};
use evoperf_core::pattern_base::RetrievedPatterns;
use evoperf_core::prompting::{build_gocot_prompt, parse_response, ParseStatus, PromptBundle, PromptTemplates};
use evoperf_core::selection::{Origin, RepresentativeSet};
use proptest::prelude::*;

mod support;
use support::fixtures::{cand, retrieval_trace};

const SLOW: &str = "n = int(input())\ns = 0\nfor i in range(n):\n    for j in range(i + 1, n):\n        s += i + j\nprint(s)\n";

fn reps() -> RepresentativeSet {
    let mut a = cand("seed-0", 1.0, 2.0, "a", Origin::Seed);
    a.source = SourceUnit::new("n = int(input())\nprint((n - 1) * n * (n - 1) // 2)\n", Language::Python).unwrap();
    let mut b = cand("iter1-3", 1.0, 1.5, "b", Origin::Iteration(1));
    b.source = SourceUnit::new(
        "n = int(input())\ns = 0\nfor i in range(n):\n    s += i * (n - 1)\nprint(s)\n",
        Language::Python,
    )
    .unwrap();
    let mut c = cand("iter1-1", 0.0, 3.0, "c", Origin::Iteration(1));
    c.source = SourceUnit::new("n = int(input())\nprint(n * n)\n", Language::Python).unwrap();
    RepresentativeSet { members: vec![a, b, c], limit: 3 }
}

fn patterns(similar: usize, different: usize) -> RetrievedPatterns {
    let base = retrieval_trace().base;
    RetrievedPatterns {
        similar: vec![base.patterns[similar].clone()],
        different: vec![base.patterns[different].clone()],
    }
}

fn slow() -> SourceUnit {
    SourceUnit::new(SLOW, Language::Python).unwrap()
}

fn build(reps: &RepresentativeSet, pats: &RetrievedPatterns) -> PromptBundle {
    build_gocot_prompt(&slow(), reps, pats, &PromptTemplates::builtin(), 24_000)
}

fn numbered_steps(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| l.len() > 2 && l.as_bytes()[0].is_ascii_digit() && &l[1..3] == ". ")
        .map(str::to_string)
        .collect()
}

#[test]
fn golden_prompt() {
    let bundle = build(&reps(), &patterns(0, 2));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/gocot_python.txt");
    let rendered = format!("--- system ---\n{}\n--- user ---\n{}", bundle.system_text, bundle.user_text);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(rendered, golden);
}

#[test]
fn three_steps_with_representatives() {
    let bundle = build(&reps(), &patterns(0, 2));
    let steps = numbered_steps(bundle.instructions());
    assert_eq!(steps.len(), 3);
    assert!(steps[0].starts_with("1. Crossover"));
    assert!(steps[1].starts_with("2. Mutation"));
    assert!(steps[2].starts_with("3. Conclude"));
    assert_eq!(numbered_steps(bundle.reasoning_spec()).len(), 3);

    let i = bundle.sections.instructions.clone();
    let r = bundle.sections.reasoning_spec.clone();
    let p = bundle.sections.input_block.clone();
    assert!(i.end <= r.start && r.end <= p.start && p.end == bundle.user_text.len());
    assert!(bundle.input_block().contains("Version 1 (correct, speedup 2.00x)"));
    assert!(bundle.input_block().contains("Version 3 (incorrect, speedup 3.00x)"));
    assert!(bundle.input_block().contains("#### Similar pattern"));
    assert!(bundle.input_block().contains("#### Different pattern"));
}

#[test]
fn empty_representatives_drop_crossover() {
    let bundle = build(&RepresentativeSet::empty(3), &patterns(0, 2));
    let steps = numbered_steps(bundle.instructions());
    assert_eq!(steps.len(), 2);
    assert!(steps[0].starts_with("1. Mutation"));
    assert!(!bundle.user_text.contains("Crossover"));
    assert!(bundle.input_block().contains("(none yet)"));
}

#[test]
fn distinct_inputs_give_distinct_prompts() {
    let all = reps();
    let mut hashes = HashSet::new();
    let mut count = 0;
    for mask in 0u8..8 {
        let members = all.members.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| c.clone()).collect();
        let rs = RepresentativeSet { members, limit: 3 };
        for s in 0..3 {
            for d in 0..3 {
                hashes.insert(build(&rs, &patterns(s, d)).hash());
                count += 1;
            }
        }
    }
    assert_eq!(hashes.len(), count);
    assert_eq!(build(&all, &patterns(0, 2)), build(&all, &patterns(0, 2)));
}

#[test]
fn hash_ignores_measured_speedups_only() {
    let base = build(&reps(), &patterns(0, 2));
    let mut noisy = reps();
    noisy.members[0].speedup_public = 2.37;
    noisy.members[2].speedup_public = 0.91;
    let other = build(&noisy, &patterns(0, 2));
    assert_ne!(base.user_text, other.user_text);
    assert_eq!(base.hash(), other.hash());
    assert!(other.user_text.contains("speedup 2.37x"));

    let mut flipped = reps();
    flipped.members[2] = cand("iter1-1", 1.0, 3.0, "c", Origin::Iteration(1));
    flipped.members[2].source = reps().members[2].source.clone();
    assert_ne!(build(&flipped, &patterns(0, 2)).hash(), base.hash());
}

#[test]
fn overflow_drops_oldest_representative() {
    let full = build(&reps(), &patterns(0, 2));
    let cap = full.user_text.chars().count() - 1;
    let trimmed = build_gocot_prompt(&slow(), &reps(), &patterns(0, 2), &PromptTemplates::builtin(), cap);
    assert_eq!(trimmed.representative_ids, ["iter1-3", "iter1-1"]);
    let tiny = build_gocot_prompt(&slow(), &reps(), &patterns(0, 2), &PromptTemplates::builtin(), 10);
    assert!(tiny.representative_ids.is_empty());
}

#[test]
fn reply_to_golden_prompt_parses() {
    let reply = "Advantages combined: closed form.\nNew methods: none.\nFinal program:\n```python\nn = int(input())\nprint(n)\n```\n";
    let parsed = parse_response(reply, Language::Python);
    assert_eq!(parsed.parse_status, ParseStatus::FencedBlock);
    assert!(!parsed.code.is_empty());
}

fn program() -> impl Strategy<Value = String> {
    let line = prop::sample::select(vec![
        "x = 1",
        "print(x)",
        "for i in range(3):",
        "    y = [i for i in range(4)]",
        "s = \"``\"",
        "",
        "# comment",
    ]);
    prop::collection::vec(line, 1..10).prop_map(|v| v.join("\n") + "\n")
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn fenced_round_trip(code in program(), prose in "[a-zA-Z ,.]{0,40}") {
        let reply = format!("{prose}\n```python\nprint('draft')\n```\nFinal:\n```python\n{code}```\n");
        let parsed = parse_response(&reply, Language::Python);
        prop_assert_eq!(parsed.parse_status, ParseStatus::FencedBlock);
        prop_assert_eq!(parsed.code, code);
    }
}
