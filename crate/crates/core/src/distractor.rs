//! Distractor selection: oversample answer guesses from a closed-book
//! answerer, then greedily keep the candidate farthest (max-min cosine
//! distance) from the options chosen so far, the key included.

use std::io::{Read, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoding::{sample_candidates, DecodeConfig, DecodeError, Scorer};
use crate::seq2seq::Vocab;

#[derive(Debug, Error)]
pub enum DistractorError {
    #[error("only {survivors} distinct candidates survive filtering, {needed} required")]
    NotEnoughCandidates { survivors: usize, needed: usize },
    #[error("target distractor count must be at least 1")]
    ZeroTargets,
    #[error("embedder failed: {0}")]
    Embedder(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Text to unit-length vector.
pub trait Embedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, DistractorError>;
}

/// Hashed character-trigram counts, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrigramEmbedder {
    pub dim: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder { dim: 256 }
    }
}

impl Embedder for TrigramEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, DistractorError> {
        Ok(embed_char_trigrams(text, self.dim))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Bucket of a trigram under [`embed_char_trigrams`].
pub fn trigram_bucket(trigram: &str, dim: usize) -> usize {
    (fnv1a(trigram.as_bytes()) % dim as u64) as usize
}

/// Character trigrams of `^text$` after lowercasing.
pub fn char_trigrams(text: &str) -> Vec<String> {
    let padded: Vec<char> = std::iter::once('^')
        .chain(text.to_lowercase().chars())
        .chain(std::iter::once('$'))
        .collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

/// Deterministic stand-in text embedding. Strings with no trigram (the
/// empty string) map to the zero vector.
pub fn embed_char_trigrams(text: &str, dim: usize) -> Vec<f64> {
    let dim = dim.max(1);
    let mut v = vec![0.0; dim];
    for tri in char_trigrams(text) {
        v[trigram_bucket(&tri, dim)] += 1.0;
    }
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Runs an external program once per text: the text goes to stdin, a JSON
/// array of numbers is expected on stdout. The result is L2-normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandEmbedder {
    pub program: String,
}

impl Embedder for CommandEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, DistractorError> {
        let fail = |m: String| DistractorError::Embedder(format!("{}: {m}", self.program));
        let mut child = Command::new(&self.program)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(text.as_bytes())
            .map_err(|e| fail(e.to_string()))?;
        let mut out = String::new();
        child
            .stdout
            .take()
            .expect("stdout is piped")
            .read_to_string(&mut out)
            .map_err(|e| fail(e.to_string()))?;
        let status = child.wait().map_err(|e| fail(e.to_string()))?;
        if !status.success() {
            return Err(fail(format!("exited with {status}")));
        }
        let mut v: Vec<f64> = serde_json::from_str(out.trim()).map_err(|e| fail(e.to_string()))?;
        normalize(&mut v);
        Ok(v)
    }
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn comparable(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Indices of candidates that are non-empty, differ from the key and from
/// every earlier candidate (trimmed, case-insensitive).
pub fn surviving_candidates(key: &str, candidates: &[String]) -> Vec<usize> {
    let mut seen = vec![comparable(key)];
    let mut out = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let norm = comparable(c);
        if norm.is_empty() || seen.contains(&norm) {
            continue;
        }
        seen.push(norm);
        out.push(i);
    }
    out
}

/// Greedy farthest-point selection over abstract points.
///
/// `anchor` is already chosen. Each of the `k` rounds picks the pool entry
/// whose minimum distance to the chosen set is largest, ties to the lowest
/// pool position. Returns positions into `pool`.
pub fn max_min_select<P, D>(anchor: &P, pool: &[P], k: usize, distance: D) -> Vec<usize>
where
    D: Fn(&P, &P) -> f64,
{
    let mut min_dist: Vec<f64> = pool.iter().map(|p| distance(anchor, p)).collect();
    let mut taken = vec![false; pool.len()];
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k.min(pool.len()) {
        let mut best: Option<usize> = None;
        for i in 0..pool.len() {
            if !taken[i] && best.is_none_or(|b| min_dist[i] > min_dist[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        taken[b] = true;
        picked.push(b);
        for i in 0..pool.len() {
            if !taken[i] {
                min_dist[i] = min_dist[i].min(distance(&pool[b], &pool[i]));
            }
        }
    }
    picked
}

/// Picks `k` distractors from `candidates`, farthest-first from the key.
pub fn select_distractors<E: Embedder + ?Sized>(
    key: &str,
    candidates: &[String],
    k: usize,
    embedder: &E,
) -> Result<Vec<String>, DistractorError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let survivors = surviving_candidates(key, candidates);
    if survivors.len() < k {
        return Err(DistractorError::NotEnoughCandidates {
            survivors: survivors.len(),
            needed: k,
        });
    }
    let key_vec = embedder.embed(key)?;
    let pool = survivors
        .iter()
        .map(|&i| embedder.embed(&candidates[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let picked = max_min_select(&key_vec, &pool, k, |a, b| cosine_distance(a, b));
    Ok(picked.into_iter().map(|p| candidates[survivors[p]].clone()).collect())
}

/// A question with its key and ordered distractors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McQuestion {
    pub question: String,
    pub key: String,
    pub distractors: Vec<String>,
}

impl McQuestion {
    /// Distractors are distinct from each other and from the key.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![comparable(&self.key)];
        for d in &self.distractors {
            let n = comparable(d);
            if seen.contains(&n) {
                return false;
            }
            seen.push(n);
        }
        true
    }
}

/// Samples `4k` answer guesses from `scorer` given only the question text,
/// then selects `k` of them with [`select_distractors`].
#[allow(clippy::too_many_arguments)]
pub fn build_mcq<S, E>(
    question: &str,
    key: &str,
    scorer: &S,
    vocab: &Vocab,
    k: usize,
    config: &DecodeConfig,
    seed: u64,
    embedder: &E,
) -> Result<McQuestion, DistractorError>
where
    S: Scorer + ?Sized,
    E: Embedder + ?Sized,
{
    if k == 0 {
        return Err(DistractorError::ZeroTargets);
    }
    let input = vocab.encode_text_lossy(question);
    let candidates: Vec<String> = sample_candidates(scorer, &input, k, config, seed)?
        .iter()
        .map(|h| vocab.decode(&h.tokens))
        .collect();
    let distractors = select_distractors(key, &candidates, k, embedder)?;
    Ok(McQuestion {
        question: question.to_string(),
        key: key.to_string(),
        distractors,
    })
}
