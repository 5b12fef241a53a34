//! Longest-matching-block line diff.
//!
//! Ratcliff/Obershelp style: find the longest common contiguous block, then
//! recurse on both sides. Ties between equally long blocks are broken in a way
//! that does not depend on which side is "old", so diffing (b, a) is always the
//! mirror image of diffing (a, b).

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AbstractedCode;

/// Statements removed from the first program and added in the second.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiffParts {
    pub deleted: Vec<String>,
    pub added: Vec<String>,
}

impl DiffParts {
    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty() && self.added.is_empty()
    }

    pub fn swapped(self) -> Self {
        Self {
            deleted: self.added,
            added: self.deleted,
        }
    }

    /// Whitespace tokens of the deleted statements, in order.
    pub fn deleted_tokens(&self) -> Vec<String> {
        split_tokens(&self.deleted)
    }

    pub fn added_tokens(&self) -> Vec<String> {
        split_tokens(&self.added)
    }
}

fn split_tokens(lines: &[String]) -> Vec<String> {
    lines
        .iter()
        .flat_map(|l| l.split_whitespace().map(str::to_string))
        .collect()
}

/// A run of `len` equal items starting at `a` in the first and `b` in the second sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchBlock {
    pub a: usize,
    pub b: usize,
    pub len: usize,
}

/// Matching blocks between `a` and `b`, ordered by position.
pub fn matching_blocks<T: AsRef<str>>(a: &[T], b: &[T]) -> Vec<MatchBlock> {
    let text_a: Vec<&str> = a.iter().map(|s| s.as_ref()).collect();
    let text_b: Vec<&str> = b.iter().map(|s| s.as_ref()).collect();
    // Intern lines so comparisons are integer compares.
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut a_ids = Vec::with_capacity(text_a.len());
    for &line in &text_a {
        let next = ids.len();
        a_ids.push(*ids.entry(line).or_insert(next));
    }
    let mut b_ids = Vec::with_capacity(text_b.len());
    for &line in &text_b {
        let next = ids.len();
        b_ids.push(*ids.entry(line).or_insert(next));
    }
    let ctx = Ctx {
        a: &a_ids,
        b: &b_ids,
        text_a: &text_a,
        text_b: &text_b,
    };

    let mut out = Vec::new();
    let mut queue = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        if let Some(m) = ctx.longest_match(alo, ahi, blo, bhi) {
            out.push(m);
            if alo < m.a && blo < m.b {
                queue.push((alo, m.a, blo, m.b));
            }
            if m.a + m.len < ahi && m.b + m.len < bhi {
                queue.push((m.a + m.len, ahi, m.b + m.len, bhi));
            }
        }
    }
    out.sort_by_key(|m| (m.a, m.b));
    out
}

struct Ctx<'a> {
    a: &'a [usize],
    b: &'a [usize],
    text_a: &'a [&'a str],
    text_b: &'a [&'a str],
}

impl Ctx<'_> {
    fn longest_match(&self, alo: usize, ahi: usize, blo: usize, bhi: usize) -> Option<MatchBlock> {
        let width = bhi - blo;
        let mut prev = vec![0usize; width + 1];
        let mut row = vec![0usize; width + 1];
        let mut best_len = 0;
        let mut best: Vec<MatchBlock> = Vec::new();
        for i in alo..ahi {
            for j in blo..bhi {
                let k = j - blo + 1;
                row[k] = if self.a[i] == self.b[j] { prev[k - 1] + 1 } else { 0 };
                let len = row[k];
                if len == 0 {
                    continue;
                }
                let block = MatchBlock {
                    a: i + 1 - len,
                    b: j + 1 - len,
                    len,
                };
                match len.cmp(&best_len) {
                    Ordering::Greater => {
                        best_len = len;
                        best.clear();
                        best.push(block);
                    }
                    Ordering::Equal => best.push(block),
                    Ordering::Less => {}
                }
            }
            std::mem::swap(&mut prev, &mut row);
            row.iter_mut().for_each(|v| *v = 0);
        }
        best.into_iter()
            .min_by(|x, y| self.tie_break(x, y, alo, ahi, blo, bhi))
    }

    /// Orders equally long candidate blocks. Every criterion is symmetric under
    /// swapping the two sides, except the final positional fallback.
    fn tie_break(
        &self,
        x: &MatchBlock,
        y: &MatchBlock,
        alo: usize,
        ahi: usize,
        blo: usize,
        bhi: usize,
    ) -> Ordering {
        let offset = |m: &MatchBlock| (m.a - alo) + (m.b - blo);
        let skew = |m: &MatchBlock| (m.a - alo).abs_diff(m.b - blo);
        let content = |m: &MatchBlock| &self.text_a[m.a..m.a + m.len];
        let prefixes = |m: &MatchBlock| {
            sorted_pair(&self.text_a[alo..m.a], &self.text_b[blo..m.b])
        };
        let suffixes = |m: &MatchBlock| {
            sorted_pair(&self.text_a[m.a + m.len..ahi], &self.text_b[m.b + m.len..bhi])
        };
        offset(x)
            .cmp(&offset(y))
            .then_with(|| skew(x).cmp(&skew(y)))
            .then_with(|| content(x).cmp(content(y)))
            .then_with(|| prefixes(x).cmp(&prefixes(y)))
            .then_with(|| suffixes(x).cmp(&suffixes(y)))
            .then_with(|| x.a.cmp(&y.a))
    }
}

fn sorted_pair<'s>(x: &'s [&'s str], y: &'s [&'s str]) -> (&'s [&'s str], &'s [&'s str]) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Lines of `a` not covered by a matching block are `deleted`; lines of `b`
/// not covered are `added`. Order is preserved.
pub fn extract_diff(a: &AbstractedCode, b: &AbstractedCode) -> DiffParts {
    diff_lines(&a.lines, &b.lines)
}

pub(crate) fn diff_lines<T: AsRef<str>>(a: &[T], b: &[T]) -> DiffParts {
    let blocks = matching_blocks(a, b);
    let mut in_a = vec![false; a.len()];
    let mut in_b = vec![false; b.len()];
    for m in &blocks {
        in_a[m.a..m.a + m.len].iter_mut().for_each(|v| *v = true);
        in_b[m.b..m.b + m.len].iter_mut().for_each(|v| *v = true);
    }
    let pick = |lines: &[T], matched: &[bool]| {
        lines
            .iter()
            .zip(matched)
            .filter(|(_, &m)| !m)
            .map(|(l, _)| l.as_ref().to_string())
            .collect()
    };
    DiffParts {
        deleted: pick(a, &in_a),
        added: pick(b, &in_b),
    }
}
