//! Project-agnostic abstraction of source code.
//!
//! Source is parsed with tree-sitter, user-defined identifiers and literals are
//! replaced by role-tagged placeholders numbered in order of first occurrence,
//! and the result is normalised to one statement per line. Two programs that
//! differ only by a consistent renaming of their own identifiers abstract to
//! the same [`AbstractedCode`].

mod diff;
mod distance;
mod lexicon;
mod walker;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{extract_diff, matching_blocks, DiffParts, MatchBlock};
pub use distance::{levenshtein, token_edit_distance};
pub use walker::syntax_is_valid;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("unsupported language `{0}` (expected `python` or `cpp`)")]
    UnsupportedLanguage(String),
    #[error("source text is empty")]
    EmptySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Cpp,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Cpp => "cpp",
        }
    }

    /// Human-facing name used in prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            Language::Python => "Python",
            Language::Cpp => "C++",
        }
    }

    /// Info string for fenced code blocks.
    pub fn fence_tag(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Cpp => "cpp",
        }
    }

    pub fn source_extension(self) -> &'static str {
        match self {
            Language::Python => "py",
            Language::Cpp => "cpp",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = AbstractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "python" | "py" | "python3" => Ok(Language::Python),
            "cpp" | "c++" | "cxx" => Ok(Language::Cpp),
            other => Err(AbstractionError::UnsupportedLanguage(other.to_string())),
        }
    }
}

/// A raw program in one of the supported languages.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceUnit {
    text: String,
    language: Language,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>, language: Language) -> Result<Self, AbstractionError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(AbstractionError::EmptySource);
        }
        Ok(Self { text, language })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn language(&self) -> Language {
        self.language
    }
}

/// Abstracted statements of one program.
///
/// `tokens` is the concatenation of the whitespace-separated tokens of every
/// entry of `lines`, in order. `degraded` is set when no syntax tree could be
/// produced and the text was only split into tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbstractedCode {
    pub language: Language,
    pub lines: Vec<String>,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub degraded: bool,
}

impl AbstractedCode {
    pub(crate) fn from_lines(language: Language, lines: Vec<String>, degraded: bool) -> Self {
        let tokens = lines
            .iter()
            .flat_map(|line| line.split_whitespace().map(str::to_string))
            .collect();
        Self {
            language,
            lines,
            tokens,
            degraded,
        }
    }

    /// Builds an abstraction directly from already-abstracted lines.
    pub fn from_abstract_lines<I, S>(language: Language, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_lines(language, lines.into_iter().map(Into::into).collect(), false)
    }

    /// The key used for "identical abstraction" comparisons.
    pub fn canonical_text(&self) -> String {
        self.lines.join("\n")
    }

    pub fn same_abstraction(&self, other: &AbstractedCode) -> bool {
        self.lines == other.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Abstracts `src` into placeholder form. Never fails: if the parser cannot
/// produce a tree, the text is tokenized verbatim and the result is flagged
/// as degraded.
pub fn abstract_code(src: &SourceUnit) -> AbstractedCode {
    walker::abstract_source(src.text(), src.language())
}
