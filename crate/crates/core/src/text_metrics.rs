//! ROUGE-N, ROUGE-L and the question/answer aware ROUGE-QAG score.
//!
//! Text is tokenized by lowercasing and splitting on every character that is
//! not alphanumeric. No stemming and no stopword removal is applied, so
//! scores are deterministic but will not match stemmed ROUGE toolkits
//! bit-for-bit.
//!
//! Multi-reference scores take the reference with the best F1.
//! ROUGE-QAG splits a combined prediction into question and answer at a
//! separator, scores each half against the matching half of every reference,
//! combines the two F1 values with a harmonic mean and keeps the best
//! reference.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QaPair;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("at least one reference is required")]
    NoReferences,
    #[error("n-gram order must be positive")]
    ZeroOrder,
    #[error("question/answer separator must be non-empty")]
    EmptySeparator,
}

/// Lowercased word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Builds a sequence from already-normalized tokens. Empty tokens are dropped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenSeq(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Lowercases `text` and returns the maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> TokenSeq {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|run| !run.is_empty())
        .map(str::to_lowercase)
        .collect();
    TokenSeq(tokens)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    /// Score from an overlap count and the two sequence totals. A zero total
    /// yields zero for the matching component.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        RougeScore {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

/// Harmonic mean of two non-negative values, defined as 0 when either is 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    N(usize),
    L,
}

impl RougeVariant {
    pub const ROUGE_1: RougeVariant = RougeVariant::N(1);
    pub const ROUGE_2: RougeVariant = RougeVariant::N(2);

    pub fn score(self, candidate: &TokenSeq, reference: &TokenSeq) -> Result<RougeScore, MetricsError> {
        match self {
            RougeVariant::N(n) => rouge_n(candidate, reference, n),
            RougeVariant::L => Ok(rouge_l(candidate, reference)),
        }
    }
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RougeVariant::N(n) => write!(f, "R{n}"),
            RougeVariant::L => f.write_str("RL"),
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped (multiset intersection) n-gram counts.
pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> Result<RougeScore, MetricsError> {
    if n == 0 {
        return Err(MetricsError::ZeroOrder);
    }
    let cand = ngram_counts(candidate.as_slice(), n);
    let refs = ngram_counts(reference.as_slice(), n);
    let overlap = cand
        .iter()
        .map(|(gram, &c)| refs.get(gram).map_or(0, |&r| c.min(r)))
        .sum();
    let total = |seq: &TokenSeq| seq.len().saturating_sub(n - 1);
    Ok(RougeScore::from_counts(overlap, total(candidate), total(reference)))
}

/// Length of the longest common subsequence, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Sentence-level ROUGE-L.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> RougeScore {
    let lcs = lcs_len(candidate.as_slice(), reference.as_slice());
    RougeScore::from_counts(lcs, candidate.len(), reference.len())
}

/// Best-F1 score over `references`; ties keep the earliest reference.
pub fn rouge_multi(
    candidate: &TokenSeq,
    references: &[TokenSeq],
    variant: RougeVariant,
) -> Result<RougeScore, MetricsError> {
    let mut best: Option<RougeScore> = None;
    for reference in references {
        let score = variant.score(candidate, reference)?;
        if best.is_none_or(|b| score.f1 > b.f1) {
            best = Some(score);
        }
    }
    best.ok_or(MetricsError::NoReferences)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSplitConfig {
    separator: String,
}

impl QaSplitConfig {
    pub const DEFAULT_SEPARATOR: &'static str = "<sep>";

    pub fn new(separator: impl Into<String>) -> Result<Self, MetricsError> {
        let separator = separator.into();
        if separator.is_empty() {
            return Err(MetricsError::EmptySeparator);
        }
        Ok(QaSplitConfig { separator })
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }

    /// Splits at the first separator occurrence.
    pub fn split<'a>(&self, combined: &'a str) -> Option<(&'a str, &'a str)> {
        combined.split_once(self.separator.as_str())
    }

    /// Renders a pair as one combined target string.
    pub fn join(&self, pair: &QaPair) -> String {
        format!("{} {} {}", pair.question, self.separator, pair.answer)
    }
}

impl Default for QaSplitConfig {
    fn default() -> Self {
        QaSplitConfig {
            separator: Self::DEFAULT_SEPARATOR.to_string(),
        }
    }
}

/// ROUGE-QAG F score of a combined `question <sep> answer` prediction.
///
/// Returns 0 when the prediction has no separator.
pub fn rouge_qag(
    prediction: &str,
    references: &[QaPair],
    variant: RougeVariant,
    config: &QaSplitConfig,
) -> Result<f64, MetricsError> {
    if references.is_empty() {
        return Err(MetricsError::NoReferences);
    }
    let Some((question, answer)) = config.split(prediction) else {
        return Ok(0.0);
    };
    let question = tokenize(question);
    let answer = tokenize(answer);
    let mut best = 0.0f64;
    for pair in references {
        let q = variant.score(&question, &tokenize(&pair.question))?.f1;
        let a = variant.score(&answer, &tokenize(&pair.answer))?.f1;
        best = best.max(harmonic_mean(q, a));
    }
    Ok(best)
}

/// Plain multi-reference ROUGE F1 of a combined prediction, with the
/// separator removed from the prediction and each reference rendered as
/// `question answer`.
pub fn rouge_combined(
    prediction: &str,
    references: &[QaPair],
    variant: RougeVariant,
    config: &QaSplitConfig,
) -> Result<f64, MetricsError> {
    let candidate = tokenize(&prediction.replace(config.separator(), " "));
    let refs: Vec<TokenSeq> = references
        .iter()
        .map(|p| tokenize(&format!("{} {}", p.question, p.answer)))
        .collect();
    Ok(rouge_multi(&candidate, &refs, variant)?.f1)
}
