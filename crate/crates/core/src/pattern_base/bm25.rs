use std::collections::BTreeMap;
use std::ops::{Add, Index};

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// Lowercases and drops tokens that carry no letter or digit.
pub fn normalize_tokens<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params<T> {
    pub k1: T,
    pub b: T,
}

impl<T: Scalar> Default for Bm25Params<T> {
    fn default() -> Self {
        Self {
            k1: T::of(1.2),
            b: T::of(0.75),
        }
    }
}

/// Inverted index over already-normalized documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bm25Index {
    doc_len: Vec<usize>,
    /// term -> (document, term frequency), documents ascending.
    postings: BTreeMap<String, Vec<(usize, usize)>>,
}

impl Bm25Index {
    pub fn build<D, S>(docs: D) -> Self
    where
        D: IntoIterator,
        D::Item: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut doc_len = Vec::new();
        let mut postings: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        for (doc, tokens) in docs.into_iter().enumerate() {
            let tokens = tokens.as_ref();
            doc_len.push(tokens.len());
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t.as_ref()).or_default() += 1;
            }
            for (term, n) in tf {
                postings.entry(term.to_string()).or_default().push((doc, n));
            }
        }
        Self { doc_len, postings }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_len.len()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.doc_len.is_empty() {
            return 0.0;
        }
        self.doc_len.iter().sum::<usize>() as f64 / self.doc_len.len() as f64
    }

    /// BM25 score of every document for `query`. Repeated query terms
    /// contribute once per occurrence.
    pub fn scores<T: Scalar, S: AsRef<str>>(&self, query: &[S], params: Bm25Params<T>) -> ScoreVector<T> {
        let n = self.doc_count();
        let mut values = vec![T::zero(); n];
        let total: usize = self.doc_len.iter().sum();
        if n == 0 || total == 0 {
            return ScoreVector { values };
        }
        let avgdl = T::of_usize(total) / T::of_usize(n);
        let half = T::of(0.5);
        let one = T::one();
        for term in query {
            let Some(list) = self.postings.get(term.as_ref()) else {
                continue;
            };
            let df = T::of_usize(list.len());
            let idf = (one + (T::of_usize(n) - df + half) / (df + half)).ln();
            for &(doc, tf) in list {
                let tf = T::of_usize(tf);
                let norm = params.k1 * (one - params.b + params.b * T::of_usize(self.doc_len[doc]) / avgdl);
                values[doc] = values[doc] + idf * tf * (params.k1 + one) / (tf + norm);
            }
        }
        ScoreVector { values }
    }
}

/// One score per pattern, indexed by pattern id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }

    /// `max(self) - self`, elementwise.
    pub fn inverted(&self) -> Self {
        let m = self.max();
        Self {
            values: self.values.iter().map(|&v| m - v).collect(),
        }
    }

    /// Index of the largest value; the lowest index wins ties.
    pub fn argmax(&self) -> Option<usize> {
        self.top(1).first().copied()
    }

    /// Indices of the `k` largest values, descending, lowest index first on ties.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| {
            self.values[b]
                .partial_cmp(&self.values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }
}

impl<T: Scalar> Add for &ScoreVector<T> {
    type Output = ScoreVector<T>;

    fn add(self, rhs: Self) -> ScoreVector<T> {
        assert_eq!(self.len(), rhs.len(), "score vectors of different length");
        ScoreVector {
            values: self.values.iter().zip(&rhs.values).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T> Index<usize> for ScoreVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}
