//! Prompt assembly and response parsing.
//!
//! The optimization prompt has three parts: numbered genetic-operator steps
//! (crossover over the representatives, mutation from retrieved patterns,
//! conclude and generate), a reasoning format, and the input block with the
//! slow program, the representatives with their fitness, and the patterns.
//! All fixed wording comes from a template file; the built-in copy lives in
//! `templates/gocot.txt`.

mod parse;

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::abstraction::{Language, SourceUnit};
use crate::pattern_base::{Pattern, RetrievedPatterns};
use crate::selection::{Candidate, RepresentativeSet};

pub use parse::{parse_response, ParseStatus, ParsedResponse};

const BUILTIN: &str = include_str!("../../templates/gocot.txt");

const REQUIRED: &[&str] = &[
    "version",
    "system",
    "instructions",
    "step.crossover",
    "step.mutation",
    "step.generate",
    "reasoning",
    "reasoning.crossover",
    "reasoning.mutation",
    "reasoning.generate",
    "input",
    "representative",
    "no_representatives",
    "pattern",
    "seed.system",
    "seed.user",
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template section `{0}` is missing")]
    MissingSection(String),
    #[error("template section `{0}` appears twice")]
    DuplicateSection(String),
    #[error("text before the first section on line {0}")]
    StrayText(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Named template sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    sections: HashMap<String, String>,
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in templates are well formed")
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut sections: HashMap<String, String> = HashMap::new();
        let mut current: Option<(String, String)> = None;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let trimmed = line.trim_end();
            if let Some(name) = trimmed.strip_prefix("=== ").and_then(|s| s.strip_suffix(" ===")) {
                if let Some((n, body)) = current.take() {
                    insert_section(&mut sections, n, body)?;
                }
                current = Some((name.trim().to_string(), String::new()));
                continue;
            }
            match current.as_mut() {
                Some((_, body)) => body.push_str(line),
                None if trimmed.is_empty() || trimmed.starts_with('#') => {}
                None => return Err(TemplateError::StrayText(i + 1)),
            }
        }
        if let Some((n, body)) = current {
            insert_section(&mut sections, n, body)?;
        }
        for name in REQUIRED {
            if !sections.contains_key(*name) {
                return Err(TemplateError::MissingSection(name.to_string()));
            }
        }
        Ok(Self { sections })
    }

    pub fn version(&self) -> &str {
        self.get("version").trim()
    }

    fn get(&self, name: &str) -> &str {
        &self.sections[name]
    }
}

fn insert_section(sections: &mut HashMap<String, String>, name: String, mut body: String) -> Result<(), TemplateError> {
    // The newline before the next section header belongs to the header.
    if body.ends_with('\n') {
        body.pop();
    }
    if sections.contains_key(&name) {
        return Err(TemplateError::DuplicateSection(name));
    }
    sections.insert(name, body);
    Ok(())
}

/// Replaces `[KEY]` placeholders in one pass, so substituted text is never
/// scanned again.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let hit = values.iter().find(|(key, _)| {
            tail.len() > key.len() + 1 && tail[1..].starts_with(key) && tail[1 + key.len()..].starts_with(']')
        });
        match hit {
            Some((key, value)) => {
                out.push_str(value);
                rest = &tail[key.len() + 2..];
            }
            None => {
                out.push('[');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Code as embedded in a prompt: newline-terminated, with the internal
/// marker character (never legitimate in source) neutralized.
fn with_newline(code: &str) -> String {
    let code = code.replace(SENTINEL, "\u{FFFD}");
    if code.ends_with('\n') {
        code
    } else {
        format!("{code}\n")
    }
}

/// Byte ranges of the three prompt parts inside `user_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSections {
    pub instructions: Range<usize>,
    pub reasoning_spec: Range<usize>,
    pub input_block: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub sections: PromptSections,
    /// Ids of the representatives that made it into the prompt.
    #[serde(default)]
    pub representative_ids: Vec<String>,
    /// Byte ranges of measured values (speedups) inside `user_text`.
    #[serde(default)]
    pub volatile_spans: Vec<Range<usize>>,
}

impl PromptBundle {
    /// Hex SHA-256 of `user_text` with every volatile span replaced by `#`.
    /// Timing noise changes the displayed speedups between runs, so the
    /// replay key must not depend on them.
    pub fn hash(&self) -> String {
        prompt_hash(&self.stable_text())
    }

    pub fn stable_text(&self) -> String {
        let mut out = String::with_capacity(self.user_text.len());
        let mut pos = 0;
        for span in &self.volatile_spans {
            out.push_str(&self.user_text[pos..span.start]);
            out.push('#');
            pos = span.end;
        }
        out.push_str(&self.user_text[pos..]);
        out
    }

    pub fn instructions(&self) -> &str {
        &self.user_text[self.sections.instructions.clone()]
    }

    pub fn reasoning_spec(&self) -> &str {
        &self.user_text[self.sections.reasoning_spec.clone()]
    }

    pub fn input_block(&self) -> &str {
        &self.user_text[self.sections.input_block.clone()]
    }
}

pub fn prompt_hash(user_text: &str) -> String {
    hex::encode(Sha256::digest(user_text.as_bytes()))
}

fn format_speedup(s: f64) -> String {
    if s.is_finite() {
        format!("{s:.2}")
    } else {
        "inf".to_string()
    }
}

fn render_statements(lines: &[String]) -> String {
    if lines.is_empty() {
        return "(none)".to_string();
    }
    lines.iter().map(|l| format!("- {l}")).collect::<Vec<_>>().join("\n")
}

fn render_pattern(t: &PromptTemplates, kind: &str, p: &Pattern, fence: &str) -> String {
    fill(
        t.get("pattern"),
        &[
            ("KIND", kind),
            ("FENCE", fence),
            ("BEFORE", &with_newline(p.raw_slow.text())),
            ("AFTER", &with_newline(p.raw_fast.text())),
            ("DELETED", &render_statements(&p.deleted)),
            ("ADDED", &render_statements(&p.added)),
        ],
    )
}

/// Marks where a measured value goes until the prompt text is final.
const SENTINEL: char = '\u{1}';

fn render_representative(t: &PromptTemplates, index: usize, c: &Candidate, fence: &str) -> String {
    let verdict = if c.is_correct() { "correct" } else { "incorrect" };
    fill(
        t.get("representative"),
        &[
            ("INDEX", &index.to_string()),
            ("VERDICT", verdict),
            ("SPEEDUP", &format!("{SENTINEL}{}{SENTINEL}", index - 1)),
            ("FENCE", fence),
            ("CODE", &with_newline(c.source.text())),
        ],
    ) + "\n"
}

fn render_patterns(t: &PromptTemplates, pats: &RetrievedPatterns, fence: &str) -> String {
    let label = |kind: &str, i: usize, n: usize| if n > 1 { format!("{kind} {}", i + 1) } else { kind.to_string() };
    let similar = pats.similar.iter().enumerate().map(|(i, p)| (label("Similar", i, pats.similar.len()), p));
    let different = pats.different.iter().enumerate().map(|(i, p)| (label("Different", i, pats.different.len()), p));
    similar
        .chain(different)
        .map(|(kind, p)| render_pattern(t, &kind, p, fence) + "\n")
        .collect::<Vec<_>>()
        .join("\n")
}

fn assemble(
    t: &PromptTemplates,
    language: Language,
    slow: &SourceUnit,
    reps: &[&Candidate],
    pats: &RetrievedPatterns,
) -> PromptBundle {
    let lang = language.display_name();
    let fence = language.fence_tag();
    let base = [("LANGUAGE", lang), ("FENCE", fence)];
    let steps: Vec<&str> = if reps.is_empty() {
        vec!["mutation", "generate"]
    } else {
        vec!["crossover", "mutation", "generate"]
    };
    let numbered = |prefix: &str| -> String {
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}\n", i + 1, fill(t.get(&format!("{prefix}.{s}")), &base)))
            .collect()
    };

    let mut user = String::new();
    let start = user.len();
    user.push_str(&fill(t.get("instructions"), &base));
    user.push('\n');
    user.push_str(&numbered("step"));
    let instructions = start..user.len();

    user.push('\n');
    let start = user.len();
    user.push_str(&fill(t.get("reasoning"), &base));
    user.push('\n');
    user.push_str(&numbered("reasoning"));
    let reasoning_spec = start..user.len();

    user.push('\n');
    let start = user.len();
    let rep_text = if reps.is_empty() {
        format!("{}\n", t.get("no_representatives"))
    } else {
        reps.iter()
            .enumerate()
            .map(|(i, c)| render_representative(t, i + 1, c, fence))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let input = fill(
        t.get("input"),
        &[
            ("LANGUAGE", lang),
            ("FENCE", fence),
            ("SLOW_CODE", &with_newline(slow.text())),
            ("REPRESENTATIVES", &rep_text),
            ("PATTERNS", &render_patterns(t, pats, fence)),
        ],
    );
    user.push_str(&input);
    if !user.ends_with('\n') {
        user.push('\n');
    }
    // Measured values only occur in the input block, the last section, so
    // resolving them moves no other section boundary.
    let (user, volatile_spans) = resolve_sentinels(&user, reps);
    let input_block = start..user.len();

    PromptBundle {
        system_text: fill(t.get("system"), &base),
        user_text: user,
        sections: PromptSections {
            instructions,
            reasoning_spec,
            input_block,
        },
        representative_ids: reps.iter().map(|c| c.id.clone()).collect(),
        volatile_spans,
    }
}

/// Replaces `SENTINEL index SENTINEL` markers with the formatted speedup of
/// representative `index` and returns the byte span of each value.
fn resolve_sentinels(text: &str, reps: &[&Candidate]) -> (String, Vec<Range<usize>>) {
    let mut out = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut parts = text.split(SENTINEL);
    out.push_str(parts.next().unwrap_or_default());
    while let (Some(index), Some(after)) = (parts.next(), parts.next()) {
        let value = index
            .parse::<usize>()
            .ok()
            .and_then(|i| reps.get(i))
            .map_or_else(|| index.to_string(), |c| format_speedup(c.speedup_public));
        spans.push(out.len()..out.len() + value.len());
        out.push_str(&value);
        out.push_str(after);
    }
    (out, spans)
}

/// Builds the optimization prompt. When the user text exceeds `max_chars`,
/// representatives are dropped oldest origin first (the lowest-ranked among
/// equally old ones) until it fits or none are left.
pub fn build_gocot_prompt(
    slow: &SourceUnit,
    reps: &RepresentativeSet,
    pats: &RetrievedPatterns,
    templates: &PromptTemplates,
    max_chars: usize,
) -> PromptBundle {
    let mut kept: Vec<&Candidate> = reps.iter().collect();
    loop {
        let bundle = assemble(templates, slow.language(), slow, &kept, pats);
        if bundle.user_text.chars().count() <= max_chars || kept.is_empty() {
            if bundle.user_text.chars().count() > max_chars {
                log::warn!("prompt exceeds {max_chars} characters even without representatives");
            }
            return bundle;
        }
        let oldest = kept.iter().map(|c| c.origin).min().expect("non-empty");
        let victim = kept.iter().rposition(|c| c.origin == oldest).expect("present");
        log::debug!("prompt over {max_chars} characters, dropping representative {}", kept[victim].id);
        kept.remove(victim);
    }
}

/// The plain instruction prompt used to seed the population.
pub fn build_seed_prompt(slow: &SourceUnit, templates: &PromptTemplates) -> PromptBundle {
    let lang = slow.language().display_name();
    let values = [
        ("LANGUAGE", lang),
        ("FENCE", slow.language().fence_tag()),
        ("SLOW_CODE", &with_newline(slow.text())),
    ];
    let mut user = fill(templates.get("seed.user"), &values);
    if !user.ends_with('\n') {
        user.push('\n');
    }
    let end = user.len();
    let input_start = user.find("```").unwrap_or(end);
    PromptBundle {
        system_text: fill(templates.get("seed.system"), &values),
        sections: PromptSections {
            instructions: 0..input_start,
            reasoning_spec: input_start..input_start,
            input_block: input_start..end,
        },
        user_text: user,
        representative_ids: Vec::new(),
        volatile_spans: Vec::new(),
    }
}
