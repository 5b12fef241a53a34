use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::abstraction::{syntax_is_valid, Language};

/// Longest reply tail (in lines) tried by the unfenced fallback.
const MAX_HEURISTIC_LINES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    FencedBlock,
    Heuristic,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub code: String,
    pub reasoning_text: String,
    pub parse_status: ParseStatus,
}

impl ParsedResponse {
    fn failed(text: &str) -> Self {
        Self {
            code: String::new(),
            reasoning_text: text.trim().to_string(),
            parse_status: ParseStatus::Failed,
        }
    }
}

/// Extracts the program from a model reply. The last closed fenced block
/// wins; its content is returned byte for byte, including the newline that
/// ends its last line. Without a closed fence, the longest tail of the reply
/// that parses cleanly and contains at least one code-like line is used.
pub fn parse_response(text: &str, language: Language) -> ParsedResponse {
    if let Some((fence_start, code)) = last_fenced_block(text) {
        return ParsedResponse {
            code: code.to_string(),
            reasoning_text: text[..fence_start].trim().to_string(),
            parse_status: ParseStatus::FencedBlock,
        };
    }
    match heuristic_tail(text, language) {
        Some((start, code)) => ParsedResponse {
            code,
            reasoning_text: text[..start].trim().to_string(),
            parse_status: ParseStatus::Heuristic,
        },
        None => ParsedResponse::failed(text),
    }
}

/// Byte offset of the opening fence line and the block content.
fn last_fenced_block(text: &str) -> Option<(usize, &str)> {
    let mut open: Option<(usize, usize)> = None;
    let mut last = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        match open {
            None if trimmed.starts_with("```") => open = Some((offset, offset + line.len())),
            Some((fence, body)) if trimmed == "```" => {
                last = Some((fence, &text[body..offset]));
                open = None;
            }
            _ => {}
        }
        offset += line.len();
    }
    last
}

fn looks_like_code(line: &str, language: Language) -> bool {
    static PY: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"^\s*(import |from |def |class |for |while |if |print\(|return\b)|[=(:]").unwrap()
    });
    static CPP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[;{}]|^\s*#include").unwrap());
    match language {
        Language::Python => PY.is_match(line),
        Language::Cpp => CPP.is_match(line),
    }
}

fn heuristic_tail(text: &str, language: Language) -> Option<(usize, String)> {
    let mut starts = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        starts.push(offset);
        offset += line.len();
    }
    let first = starts.len().saturating_sub(MAX_HEURISTIC_LINES);
    for &start in &starts[first..] {
        let tail = &text[start..];
        let code: String = tail
            .split_inclusive('\n')
            .filter(|l| !l.trim_start().starts_with("```"))
            .collect();
        if code.trim().is_empty() || !code.lines().any(|l| looks_like_code(l, language)) {
            continue;
        }
        if syntax_is_valid(&code, language) {
            return Some((start, code));
        }
    }
    None
}
