//! Beam search with length normalization and seeded ancestral sampling over
//! any next-token scorer.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq2seq::{forward_logits, log_softmax, ModelError, ModelParams, TokenId};

/// Allowed deviation of a scorer's log-sum-exp from zero.
pub const LOG_PROB_TOLERANCE: f64 = 1e-9;

/// Temperatures at or below this are decoded as argmax.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

/// Candidate multiplier for distractor sampling.
pub const OVERSAMPLE_FACTOR: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("scorer returned {got} scores for a vocabulary of {expected}")]
    WrongWidth { expected: usize, got: usize },
    #[error("scorer output is not a log-probability vector (log-sum-exp = {0})")]
    NotNormalized(f64),
    #[error("invalid decode config: {0}")]
    InvalidConfig(&'static str),
    #[error("target count must be at least 1")]
    ZeroTargets,
    #[error("no hypothesis has non-zero probability")]
    NoHypothesis,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Next-token distribution given the input and the tokens emitted so far.
pub trait Scorer {
    fn vocab_size(&self) -> usize;

    fn eos(&self) -> TokenId;

    /// Log-probabilities of every vocabulary entry.
    fn next_log_probs(&self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError>;
}

/// [`Scorer`] backed by the linear model in [`crate::seq2seq`].
#[derive(Debug, Clone, Copy)]
pub struct ModelScorer<'a> {
    params: &'a ModelParams,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        ModelScorer { params }
    }
}

impl Scorer for ModelScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.params.vocab_size()
    }

    fn eos(&self) -> TokenId {
        self.params.vocab().eos()
    }

    fn next_log_probs(&self, input: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        let prev = prefix.last().copied().unwrap_or(self.params.vocab().bos());
        let logits = forward_logits(self.params, input, prev)?;
        Ok(log_softmax(logits.view()).to_vec())
    }
}

fn checked_log_probs<S: Scorer + ?Sized>(
    scorer: &S,
    input: &[TokenId],
    prefix: &[TokenId],
) -> Result<Vec<f64>, DecodeError> {
    let lp = scorer.next_log_probs(input, prefix)?;
    if lp.len() != scorer.vocab_size() {
        return Err(DecodeError::WrongWidth {
            expected: scorer.vocab_size(),
            got: lp.len(),
        });
    }
    let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + lp.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    if lse.is_nan() || lse.abs() > LOG_PROB_TOLERANCE || lp.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(DecodeError::NotNormalized(lse));
    }
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beams: usize,
    /// Length-penalty exponent: hypotheses rank by `log_prob / len^alpha`.
    pub alpha: f64,
    pub max_len: usize,
    pub temperature: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beams: 8,
            alpha: 0.9,
            max_len: 128,
            temperature: 1.0,
        }
    }
}

impl DecodeConfig {
    /// Settings for combined question-answer outputs.
    pub fn question_answer() -> Self {
        DecodeConfig::default()
    }

    /// Settings for distractor sampling.
    pub fn distractor() -> Self {
        DecodeConfig {
            max_len: 64,
            ..DecodeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beams == 0 {
            return Err(DecodeError::InvalidConfig("beams must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(DecodeError::InvalidConfig("alpha must be finite and non-negative"));
        }
        if self.max_len == 0 {
            return Err(DecodeError::InvalidConfig("max_len must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(DecodeError::InvalidConfig("temperature must be positive"));
        }
        Ok(())
    }
}

/// A decoded sequence. `tokens` includes the final EOS when one was emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub log_prob: f64,
}

impl Hypothesis {
    /// `log_prob / |tokens|^alpha`.
    pub fn normalized_score(&self, alpha: f64) -> f64 {
        normalized(self.log_prob, self.tokens.len(), alpha)
    }
}

pub fn normalized(log_prob: f64, len: usize, alpha: f64) -> f64 {
    log_prob / (len as f64).powf(alpha)
}

/// Higher score first, then lexicographically smaller tokens.
pub fn rank_hypotheses(a: &Hypothesis, b: &Hypothesis, alpha: f64) -> Ordering {
    b.normalized_score(alpha)
        .total_cmp(&a.normalized_score(alpha))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search keeping the `config.beams` best expansions by raw
/// log-probability at each depth. Expansions that end in EOS or reach
/// `max_len` are completed; the search stops when no open hypothesis can
/// still match the best completed normalized score.
pub fn beam_search<S: Scorer + ?Sized>(
    scorer: &S,
    input: &[TokenId],
    config: &DecodeConfig,
) -> Result<Hypothesis, DecodeError> {
    config.validate()?;
    let eos = scorer.eos();
    let bound_divisor = (config.max_len as f64).powf(config.alpha);
    let mut open = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    }];
    let mut best: Option<Hypothesis> = None;

    for depth in 1..=config.max_len {
        let mut expansions = Vec::new();
        for hyp in &open {
            let lp = checked_log_probs(scorer, input, &hyp.tokens)?;
            for (tok, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok);
                expansions.push(Hypothesis {
                    tokens,
                    log_prob: hyp.log_prob + l,
                });
            }
        }
        expansions.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens)));
        expansions.truncate(config.beams);

        open.clear();
        for hyp in expansions {
            if hyp.tokens.last() == Some(&eos) || depth == config.max_len {
                if best
                    .as_ref()
                    .is_none_or(|b| rank_hypotheses(&hyp, b, config.alpha) == Ordering::Less)
                {
                    best = Some(hyp);
                }
            } else {
                open.push(hyp);
            }
        }
        if let Some(b) = &best {
            let target = b.normalized_score(config.alpha);
            if open.iter().all(|h| h.log_prob / bound_divisor < target) {
                break;
            }
        }
        if open.is_empty() {
            break;
        }
    }
    best.ok_or(DecodeError::NoHypothesis)
}

/// Argmax decoding, ties to the lowest token id.
pub fn greedy<S: Scorer + ?Sized>(scorer: &S, input: &[TokenId], max_len: usize) -> Result<Hypothesis, DecodeError> {
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    };
    while hyp.tokens.len() < max_len {
        let lp = checked_log_probs(scorer, input, &hyp.tokens)?;
        let tok = argmax(&lp);
        hyp.log_prob += lp[tok];
        hyp.tokens.push(tok);
        if tok == scorer.eos() {
            break;
        }
    }
    Ok(hyp)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn draw(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Ancestral sampling at `config.temperature`, seeded.
pub fn sample<S: Scorer + ?Sized>(
    scorer: &S,
    input: &[TokenId],
    config: &DecodeConfig,
    seed: u64,
) -> Result<Hypothesis, DecodeError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    };
    while hyp.tokens.len() < config.max_len {
        let lp = checked_log_probs(scorer, input, &hyp.tokens)?;
        let tok = if config.temperature <= GREEDY_TEMPERATURE {
            argmax(&lp)
        } else {
            let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = lp.iter().map(|&l| ((l - max) / config.temperature).exp()).collect();
            draw(&weights, &mut rng)
        };
        hyp.log_prob += lp[tok];
        hyp.tokens.push(tok);
        if tok == scorer.eos() {
            break;
        }
    }
    Ok(hyp)
}

/// `4k` independent samples using seeds `seed, seed+1, ...`.
pub fn sample_candidates<S: Scorer + ?Sized>(
    scorer: &S,
    input: &[TokenId],
    k: usize,
    config: &DecodeConfig,
    seed: u64,
) -> Result<Vec<Hypothesis>, DecodeError> {
    if k == 0 {
        return Err(DecodeError::ZeroTargets);
    }
    (0..OVERSAMPLE_FACTOR * k)
        .map(|i| sample(scorer, input, config, seed.wrapping_add(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::{ModelParams, Vocab, BOS, EOS, PAD};

    /// Fixed next-token table keyed by the previous token.
    struct Chain {
        eos: TokenId,
        rows: Vec<Vec<f64>>,
    }

    impl Scorer for Chain {
        fn vocab_size(&self) -> usize {
            self.rows[0].len()
        }
        fn eos(&self) -> TokenId {
            self.eos
        }
        fn next_log_probs(&self, _: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
            let row = prefix.last().map_or(0, |&t| t + 1);
            Ok(self.rows[row].iter().map(|p| p.ln()).collect())
        }
    }

    /// 3 symbols: 0 = EOS, forced chain 1 -> 2 -> EOS.
    fn forced() -> Chain {
        Chain {
            eos: 0,
            rows: vec![
                vec![0.0, 1.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ],
        }
    }

    #[test]
    fn forced_chain_any_beam_width() {
        for beams in [1, 2, 8] {
            let cfg = DecodeConfig {
                beams,
                ..DecodeConfig::default()
            };
            assert_eq!(beam_search(&forced(), &[], &cfg).unwrap().tokens, vec![1, 2, 0]);
        }
        for seed in 0..20 {
            assert_eq!(
                sample(&forced(), &[], &DecodeConfig::default(), seed).unwrap().tokens,
                vec![1, 2, 0]
            );
        }
    }

    #[test]
    fn invalid_scorer_is_rejected() {
        let bad = Chain {
            eos: 0,
            rows: vec![vec![0.5, 0.6, 0.1]],
        };
        assert!(matches!(
            beam_search(&bad, &[], &DecodeConfig::default()),
            Err(DecodeError::NotNormalized(_))
        ));
        assert!(matches!(
            sample(&bad, &[], &DecodeConfig::default(), 0),
            Err(DecodeError::NotNormalized(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut DecodeConfig)| {
            let mut c = DecodeConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.beams = 0));
        assert!(bad(|c| c.alpha = -0.1));
        assert!(bad(|c| c.max_len = 0));
        assert!(bad(|c| c.temperature = 0.0));
        assert_eq!(DecodeConfig::distractor().max_len, 64);
        assert_eq!(DecodeConfig::question_answer().max_len, 128);
    }

    #[test]
    fn max_len_truncates() {
        let cfg = DecodeConfig {
            max_len: 2,
            ..DecodeConfig::default()
        };
        assert_eq!(beam_search(&forced(), &[], &cfg).unwrap().tokens, vec![1, 2]);
        assert_eq!(sample(&forced(), &[], &cfg, 3).unwrap().tokens, vec![1, 2]);
    }

    #[test]
    fn candidate_counts() {
        let cfg = DecodeConfig::distractor();
        assert_eq!(sample_candidates(&forced(), &[], 3, &cfg, 1).unwrap().len(), 12);
        assert_eq!(sample_candidates(&forced(), &[], 1, &cfg, 1).unwrap().len(), 4);
        assert_eq!(
            sample_candidates(&forced(), &[], 0, &cfg, 1),
            Err(DecodeError::ZeroTargets)
        );
    }

    #[test]
    fn model_scorer_is_normalized() {
        let vocab = Vocab::new([PAD, BOS, EOS, "a", "b"]).unwrap();
        let mut p = ModelParams::zeros(vocab);
        p.b[3] = 2.0;
        p.w[[2, 3]] = 5.0;
        let scorer = ModelScorer::new(&p);
        let out = greedy(&scorer, &[], 10).unwrap();
        assert_eq!(out.tokens, vec![3, 2]);
        let beam = beam_search(&scorer, &[4], &DecodeConfig::default()).unwrap();
        assert_eq!(beam.tokens, vec![3, 2]);
    }
}
