//! Training with several reference outputs per input.
//!
//! The minimum reference loss scores every reference of an example under
//! teacher forcing, keeps the one with the lowest length-normalized loss and
//! backpropagates through that reference only. Selection is recomputed from
//! the current parameters at every step. The baselines flatten the
//! references into single-reference examples ([`Strategy::Disaggregate`]) or
//! fix one reference per example before training ([`Strategy::SampleOne`]).

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq2seq::{gradients, sgd_step, token_losses, Gradients, ModelError, ModelParams, TokenId, WeightedExample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("loss matrix has no rows")]
    NoReferences,
    #[error("invalid loss matrix: {0}")]
    InvalidMatrix(String),
    #[error("batch size {batch_size} cannot hold the {needed} references of example {example}")]
    BatchTooSmall {
        example: usize,
        needed: usize,
        batch_size: usize,
    },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("example {0:?} has no references")]
    ExampleWithoutReferences(String),
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-token teacher-forcing losses for R references padded to T positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    values: Array2<f64>,
    lengths: Vec<usize>,
}

impl LossMatrix {
    pub fn new(values: Array2<f64>, lengths: Vec<usize>) -> Result<Self, TrainError> {
        let (rows, cols) = values.dim();
        if lengths.len() != rows {
            return Err(TrainError::InvalidMatrix(format!(
                "{} lengths for {rows} rows",
                lengths.len()
            )));
        }
        for (i, &len) in lengths.iter().enumerate() {
            if len == 0 || len > cols {
                return Err(TrainError::InvalidMatrix(format!(
                    "row {i} has length {len} with T = {cols}"
                )));
            }
            let row = values.row(i);
            if row.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(TrainError::InvalidMatrix(format!(
                    "row {i} has a negative or non-finite loss"
                )));
            }
            if row.iter().skip(len).any(|&x| x != 0.0) {
                return Err(TrainError::InvalidMatrix(format!("row {i} has non-zero padding")));
            }
        }
        Ok(LossMatrix { values, lengths })
    }

    /// Pads ragged per-reference losses with zeros to the longest row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TrainError> {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut values = Array2::zeros((rows.len(), width));
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                values[[i, j]] = x;
            }
        }
        LossMatrix::new(values, rows.iter().map(Vec::len).collect())
    }

    pub fn rows(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values.row(i).sum()
    }

    pub fn row_mean(&self, i: usize) -> f64 {
        self.row_sum(i) / self.lengths[i] as f64
    }

    /// Multiplies every entry by `factor` (must be positive and finite).
    pub fn scaled(&self, factor: f64) -> Result<Self, TrainError> {
        LossMatrix::new(&self.values * factor, self.lengths.clone())
    }
}

/// A reference choice and the loss it achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub loss: f64,
    pub selected: usize,
}

fn argmin_by(rows: usize, score: impl Fn(usize) -> f64) -> Result<Selection, TrainError> {
    let mut best: Option<Selection> = None;
    for i in 0..rows {
        let loss = score(i);
        if best.is_none_or(|b| loss < b.loss) {
            best = Some(Selection { loss, selected: i });
        }
    }
    best.ok_or(TrainError::NoReferences)
}

/// `min_i (1/l_i) Σ_j L[i][j]`, ties to the lowest index.
pub fn min_ref_loss(m: &LossMatrix) -> Result<Selection, TrainError> {
    argmin_by(m.rows(), |i| m.row_mean(i))
}

/// `min_i Σ_j L[i][j]`, ties to the lowest index.
pub fn min_ref_loss_unnorm(m: &LossMatrix) -> Result<Selection, TrainError> {
    argmin_by(m.rows(), |i| m.row_sum(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Disaggregate,
    SampleOne,
    MinRef,
    MinRefUnnorm,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Disaggregate,
        Strategy::SampleOne,
        Strategy::MinRef,
        Strategy::MinRefUnnorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Disaggregate => "DISAGGREGATE",
            Strategy::SampleOne => "SAMPLE_ONE",
            Strategy::MinRef => "MIN_REF",
            Strategy::MinRefUnnorm => "MIN_REF_UNNORM",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = TrainError;

    /// Accepts `MIN_REF`, `min-ref` and `min_ref` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| TrainError::UnknownStrategy(s.to_string()))
    }
}

/// An input with all of its reference targets, each ending in EOS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub id: String,
    pub input: Vec<TokenId>,
    pub references: Vec<Vec<TokenId>>,
}

/// Groups consecutive examples so that no example is split across batches
/// and no batch holds more than `batch_size` reference rows.
pub fn pack_batches(examples: &[TrainExample], batch_size: usize) -> Result<Vec<Vec<usize>>, TrainError> {
    let sizes: Vec<usize> = examples.iter().map(|e| e.references.len()).collect();
    let order: Vec<usize> = (0..examples.len()).collect();
    pack_rows(&sizes, &order, batch_size)
}

fn pack_rows(sizes: &[usize], order: &[usize], batch_size: usize) -> Result<Vec<Vec<usize>>, TrainError> {
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut rows = 0;
    for &idx in order {
        let needed = sizes[idx];
        if needed > batch_size {
            return Err(TrainError::BatchTooSmall {
                example: idx,
                needed,
                batch_size,
            });
        }
        if rows + needed > batch_size {
            batches.push(std::mem::take(&mut current));
            rows = 0;
        }
        current.push(idx);
        rows += needed;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

/// How per-example gradients inside a batch are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchReduction {
    /// Gradient of the summed batch loss.
    #[default]
    Sum,
    /// Gradient of the mean per-example loss.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Maximum reference rows per batch.
    pub batch_size: usize,
    #[serde(default)]
    pub reduction: BatchReduction,
}

/// One trace line per example processed at a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub example_id: String,
    pub selected_ref: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: Vec<TraceEntry>,
}

/// A unit of work: an example and, for single-reference strategies, the
/// reference it carries.
#[derive(Debug, Clone, Copy)]
struct Unit {
    example: usize,
    reference: Option<usize>,
}

/// Builds the loss matrix of `example` under `params`.
pub fn loss_matrix(params: &ModelParams, example: &TrainExample) -> Result<LossMatrix, TrainError> {
    let rows = example
        .references
        .iter()
        .map(|target| token_losses(params, &example.input, target))
        .collect::<Result<Vec<_>, _>>()?;
    LossMatrix::from_rows(&rows)
}

/// The reference used at the current parameters and its gradient weight.
fn choose(
    strategy: Strategy,
    params: &ModelParams,
    example: &TrainExample,
    reference: Option<usize>,
) -> Result<(Selection, f64), TrainError> {
    match (strategy, reference) {
        (Strategy::MinRef | Strategy::MinRefUnnorm, _) => {
            let m = loss_matrix(params, example)?;
            if strategy == Strategy::MinRef {
                let sel = min_ref_loss(&m)?;
                Ok((sel, 1.0 / m.lengths()[sel.selected] as f64))
            } else {
                Ok((min_ref_loss_unnorm(&m)?, 1.0))
            }
        }
        (_, Some(r)) => {
            let target = &example.references[r];
            let losses = token_losses(params, &example.input, target)?;
            let len = target.len() as f64;
            let loss = losses.iter().sum::<f64>() / len;
            Ok((Selection { loss, selected: r }, 1.0 / len))
        }
        (_, None) => unreachable!("single-reference units always carry a reference"),
    }
}

/// Gradient of one step on `batch` and the trace rows of that step.
fn step_gradient(
    strategy: Strategy,
    params: &ModelParams,
    examples: &[TrainExample],
    batch: &[Unit],
    step: usize,
    reduction: BatchReduction,
) -> Result<(Gradients, Vec<TraceEntry>), TrainError> {
    let mut total = Gradients::zeros(params.vocab_size());
    let mut trace = Vec::with_capacity(batch.len());
    for unit in batch {
        let example = &examples[unit.example];
        let (sel, weight) = choose(strategy, params, example, unit.reference)?;
        let g = gradients(
            params,
            &[WeightedExample {
                input: &example.input,
                target: &example.references[sel.selected],
                weight,
            }],
        )?;
        total.add_assign(&g);
        trace.push(TraceEntry {
            step,
            example_id: example.id.clone(),
            selected_ref: sel.selected,
            loss: sel.loss,
        });
    }
    if reduction == BatchReduction::Mean {
        total.scale(1.0 / batch.len() as f64);
    }
    Ok((total, trace))
}

/// Runs `config.steps` SGD steps with the given multi-reference strategy.
///
/// Each epoch shuffles the units with the seeded generator and packs them
/// into batches of at most `config.batch_size` reference rows; one batch is
/// one step. The minimum is taken per example before the batch reduction.
/// Deterministic for a fixed seed.
pub fn train(
    strategy: Strategy,
    params: ModelParams,
    examples: &[TrainExample],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if config.steps == 0 {
        return Err(TrainError::ZeroSteps);
    }
    if let Some(e) = examples.iter().find(|e| e.references.is_empty()) {
        return Err(TrainError::ExampleWithoutReferences(e.id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let units: Vec<Unit> = match strategy {
        Strategy::MinRef | Strategy::MinRefUnnorm => (0..examples.len())
            .map(|example| Unit {
                example,
                reference: None,
            })
            .collect(),
        Strategy::Disaggregate => examples
            .iter()
            .enumerate()
            .flat_map(|(example, e)| {
                (0..e.references.len()).map(move |r| Unit {
                    example,
                    reference: Some(r),
                })
            })
            .collect(),
        Strategy::SampleOne => examples
            .iter()
            .enumerate()
            .map(|(example, e)| Unit {
                example,
                reference: Some(rng.random_range(0..e.references.len())),
            })
            .collect(),
    };
    let sizes: Vec<usize> = units
        .iter()
        .map(|u| match u.reference {
            Some(_) => 1,
            None => examples[u.example].references.len(),
        })
        .collect();

    let mut params = params;
    let mut trace = Vec::new();
    let mut step = 0;
    while step < config.steps {
        let mut order: Vec<usize> = (0..units.len()).collect();
        order.shuffle(&mut rng);
        for batch in pack_rows(&sizes, &order, config.batch_size)? {
            if step == config.steps {
                break;
            }
            let batch: Vec<Unit> = batch.into_iter().map(|i| units[i]).collect();
            let (grads, rows) = step_gradient(strategy, &params, examples, &batch, step, config.reduction)?;
            params = sgd_step(&params, &grads, config.learning_rate)?;
            trace.extend(rows);
            step += 1;
        }
    }
    Ok(TrainOutcome { params, trace })
}
