//! A linear conditional next-token model with hand-derived gradients.
//!
//! Given an input token bag with mean one-hot vector `x` and the previous
//! output token `p`, the next-token logits are `U·x + W·onehot(p) + b`.
//! The per-example loss is convex in `(U, W, b)`, which keeps training
//! comparisons reproducible and makes gradient checks exact up to rounding.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_metrics::tokenize;

pub type TokenId = usize;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const PAD: &str = "<pad>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("vocabulary symbol {0:?} appears more than once")]
    DuplicateSymbol(String),
    #[error("vocabulary is missing the reserved symbol {0:?}")]
    MissingReserved(&'static str),
    #[error("vocabulary needs at least 4 symbols, got {0}")]
    TooSmall(usize),
    #[error("token id {0} is outside the vocabulary")]
    UnknownToken(TokenId),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("target sequence must end with the end-of-sequence token")]
    MissingEos,
    #[error("parameter shapes do not match the vocabulary size {0}")]
    ShapeMismatch(usize),
    #[error("parameters contain a non-finite value")]
    NonFinite,
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
}

/// Ordered symbol table with reserved BOS, EOS and PAD entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, TokenId>,
    bos: TokenId,
    eos: TokenId,
    pad: TokenId,
}

impl Vocab {
    pub fn new<I, S>(symbols: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ModelError::DuplicateSymbol(s.clone()));
            }
        }
        let find = |s: &'static str| index.get(s).copied().ok_or(ModelError::MissingReserved(s));
        let (bos, eos, pad) = (find(BOS)?, find(EOS)?, find(PAD)?);
        if symbols.len() < 4 {
            return Err(ModelError::TooSmall(symbols.len()));
        }
        Ok(Vocab {
            symbols,
            index,
            bos,
            eos,
            pad,
        })
    }

    /// Reserved symbols first, then `words` in first-seen order.
    pub fn with_words<I, S>(words: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut symbols: Vec<String> = vec![PAD.into(), BOS.into(), EOS.into()];
        let mut seen: std::collections::HashSet<String> = symbols.iter().cloned().collect();
        for w in words {
            let w = w.into();
            if seen.insert(w.clone()) {
                symbols.push(w);
            }
        }
        Vocab::new(symbols)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn pad(&self) -> TokenId {
        self.pad
    }

    pub fn id(&self, symbol: &str) -> Option<TokenId> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: TokenId) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn encode(&self, symbols: &[&str]) -> Result<Vec<TokenId>, ModelError> {
        symbols
            .iter()
            .map(|s| self.id(s).ok_or_else(|| ModelError::UnknownSymbol(s.to_string())))
            .collect()
    }

    /// Tokenizes free text and keeps only in-vocabulary words.
    pub fn encode_text_lossy(&self, text: &str) -> Vec<TokenId> {
        tokenize(text).as_slice().iter().filter_map(|w| self.id(w)).collect()
    }

    /// Joins symbols with spaces, stopping at EOS and skipping BOS/PAD.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .take_while(|&&t| t != self.eos)
            .filter(|&&t| t != self.bos && t != self.pad)
            .filter_map(|&t| self.symbol(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn check(&self, ids: &[TokenId]) -> Result<(), ModelError> {
        match ids.iter().find(|&&t| t >= self.len()) {
            Some(&t) => Err(ModelError::UnknownToken(t)),
            None => Ok(()),
        }
    }
}

/// Model weights: `u` and `w` are V×V, `b` has length V.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    vocab: Vocab,
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Gradients share the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Gradients {
    pub fn zeros(v: usize) -> Self {
        Gradients {
            u: Array2::zeros((v, v)),
            w: Array2::zeros((v, v)),
            b: Array1::zeros(v),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.u *= factor;
        self.w *= factor;
        self.b *= factor;
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.u += &other.u;
        self.w += &other.w;
        self.b += &other.b;
    }
}

impl ModelParams {
    pub fn zeros(vocab: Vocab) -> Self {
        let v = vocab.len();
        ModelParams {
            vocab,
            u: Array2::zeros((v, v)),
            w: Array2::zeros((v, v)),
            b: Array1::zeros(v),
        }
    }

    pub fn from_parts(vocab: Vocab, u: Array2<f64>, w: Array2<f64>, b: Array1<f64>) -> Result<Self, ModelError> {
        let v = vocab.len();
        if u.dim() != (v, v) || w.dim() != (v, v) || b.len() != v {
            return Err(ModelError::ShapeMismatch(v));
        }
        let finite = u.iter().chain(w.iter()).chain(b.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(ModelError::NonFinite);
        }
        Ok(ModelParams { vocab, u, w, b })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Flat JSON form: vocabulary plus row-major matrices.
    pub fn to_json(&self) -> ParamsJson {
        ParamsJson {
            vocab: self.vocab.symbols.clone(),
            u: self.u.iter().copied().collect(),
            w: self.w.iter().copied().collect(),
            b: self.b.to_vec(),
        }
    }

    pub fn from_json(json: ParamsJson) -> Result<Self, ModelError> {
        let vocab = Vocab::new(json.vocab)?;
        let v = vocab.len();
        let u = Array2::from_shape_vec((v, v), json.u).map_err(|_| ModelError::ShapeMismatch(v))?;
        let w = Array2::from_shape_vec((v, v), json.w).map_err(|_| ModelError::ShapeMismatch(v))?;
        ModelParams::from_parts(vocab, u, w, Array1::from(json.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub vocab: Vec<String>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

fn context(v: usize, input: &[TokenId]) -> Array1<f64> {
    let mut x = Array1::zeros(v);
    if !input.is_empty() {
        let share = 1.0 / input.len() as f64;
        for &t in input {
            x[t] += share;
        }
    }
    x
}

fn logits_with_context(params: &ModelParams, x: &Array1<f64>, prev: TokenId) -> Array1<f64> {
    let mut logits = params.u.dot(x);
    logits += &params.w.column(prev);
    logits += &params.b;
    logits
}

pub fn forward_logits(params: &ModelParams, input: &[TokenId], prev: TokenId) -> Result<Array1<f64>, ModelError> {
    params.vocab.check(input)?;
    params.vocab.check(&[prev])?;
    let x = context(params.vocab_size(), input);
    Ok(logits_with_context(params, &x, prev))
}

pub fn log_softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = max + logits.mapv(|x| (x - max).exp()).sum().ln();
    logits.mapv(|x| x - lse)
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    log_softmax(logits).mapv(f64::exp)
}

fn check_target(params: &ModelParams, target: &[TokenId]) -> Result<(), ModelError> {
    params.vocab.check(target)?;
    if target.last() != Some(&params.vocab.eos) {
        return Err(ModelError::MissingEos);
    }
    Ok(())
}

/// Teacher-forced cross-entropy at each target position.
pub fn token_losses(params: &ModelParams, input: &[TokenId], target: &[TokenId]) -> Result<Vec<f64>, ModelError> {
    params.vocab.check(input)?;
    check_target(params, target)?;
    let x = context(params.vocab_size(), input);
    let mut prev = params.vocab.bos;
    Ok(target
        .iter()
        .map(|&t| {
            let lp = log_softmax(logits_with_context(params, &x, prev).view());
            prev = t;
            -lp[t]
        })
        .collect())
}

/// One weighted teacher-forcing example.
#[derive(Debug, Clone, Copy)]
pub struct WeightedExample<'a> {
    pub input: &'a [TokenId],
    pub target: &'a [TokenId],
    pub weight: f64,
}

/// Σ weight · Σ token loss over the batch.
pub fn weighted_loss(params: &ModelParams, batch: &[WeightedExample<'_>]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for ex in batch {
        let losses = token_losses(params, ex.input, ex.target)?;
        total += ex.weight * losses.iter().sum::<f64>();
    }
    Ok(total)
}

/// Analytic gradient of [`weighted_loss`].
pub fn gradients(params: &ModelParams, batch: &[WeightedExample<'_>]) -> Result<Gradients, ModelError> {
    let v = params.vocab_size();
    let mut grads = Gradients::zeros(v);
    for ex in batch {
        params.vocab.check(ex.input)?;
        check_target(params, ex.target)?;
        if ex.weight == 0.0 {
            continue;
        }
        let x = context(v, ex.input);
        let mut prev = params.vocab.bos;
        for &t in ex.target {
            let mut d = softmax(logits_with_context(params, &x, prev).view());
            d[t] -= 1.0;
            d *= ex.weight;
            // dU += d xᵀ, dW[:, prev] += d, db += d
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    grads.u.column_mut(j).scaled_add(xj, &d);
                }
            }
            grads.w.column_mut(prev).scaled_add(1.0, &d);
            grads.b += &d;
            prev = t;
        }
    }
    Ok(grads)
}

pub fn sgd_step(params: &ModelParams, grads: &Gradients, learning_rate: f64) -> Result<ModelParams, ModelError> {
    if learning_rate.is_nan() || learning_rate <= 0.0 {
        return Err(ModelError::BadLearningRate(learning_rate));
    }
    let v = params.vocab_size();
    if grads.u.dim() != (v, v) || grads.w.dim() != (v, v) || grads.b.len() != v {
        return Err(ModelError::ShapeMismatch(v));
    }
    let mut next = params.clone();
    let step = |p: &mut f64, &g: &f64| *p -= learning_rate * g;
    Zip::from(&mut next.u).and(&grads.u).for_each(step);
    Zip::from(&mut next.w).and(&grads.w).for_each(step);
    Zip::from(&mut next.b).and(&grads.b).for_each(step);
    Ok(next)
}
