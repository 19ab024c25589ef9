//! Synthetic data: a small multi-reference task for comparing training
//! strategies, and a templated news-quiz corpus for exercising the pipeline.
//!
//! In the multi-reference task each input class owns one input token and
//! several reference outputs. Every reference walks a shared successor cycle
//! over the output symbols from its own start symbol for 3 to 6 steps, so one
//! reference per class is exactly learnable by the linear model while the
//! references of a class disagree on where to start and where to stop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{QaPair, StyleLabel, SummaryRecord};
use crate::decoding::{greedy, DecodeError, ModelScorer};
use crate::multiref::TrainExample;
use crate::seq2seq::{ModelParams, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskShape {
    pub classes: usize,
    pub references: usize,
    pub output_symbols: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for TaskShape {
    fn default() -> Self {
        TaskShape {
            classes: 20,
            references: 4,
            output_symbols: 12,
            min_len: 3,
            max_len: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub vocab: Vocab,
    pub examples: Vec<TrainExample>,
}

/// Builds the task. Requires `references <= output_symbols` and
/// `max_len < output_symbols`.
pub fn multi_reference_task(shape: TaskShape, seed: u64) -> SyntheticTask {
    assert!(shape.references <= shape.output_symbols && shape.max_len < shape.output_symbols);
    let outputs: Vec<String> = (0..shape.output_symbols).map(|i| format!("s{i}")).collect();
    let inputs: Vec<String> = (0..shape.classes).map(|i| format!("c{i}")).collect();
    let vocab = Vocab::with_words(outputs.iter().chain(&inputs).cloned()).expect("distinct symbols");
    let out_id = |i: usize| vocab.id(&outputs[i]).expect("output symbol");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cycle: Vec<usize> = (0..shape.output_symbols).collect();
    cycle.shuffle(&mut rng);
    let mut successor = vec![0; shape.output_symbols];
    for (i, &s) in cycle.iter().enumerate() {
        successor[s] = cycle[(i + 1) % cycle.len()];
    }

    let examples = inputs
        .iter()
        .map(|name| {
            let mut starts: Vec<usize> = (0..shape.output_symbols).collect();
            starts.shuffle(&mut rng);
            let references = starts[..shape.references]
                .iter()
                .map(|&start| {
                    let len = rng.random_range(shape.min_len..=shape.max_len);
                    let mut seq = Vec::with_capacity(len + 1);
                    let mut cur = start;
                    for _ in 0..len {
                        seq.push(out_id(cur));
                        cur = successor[cur];
                    }
                    seq.push(vocab.eos());
                    seq
                })
                .collect();
            TrainExample {
                id: name.clone(),
                input: vec![vocab.id(name).expect("input symbol")],
                references,
            }
        })
        .collect();
    SyntheticTask { vocab, examples }
}

/// Fraction of examples whose greedy decode equals one of their references.
pub fn exact_match_rate(params: &ModelParams, examples: &[TrainExample]) -> Result<f64, DecodeError> {
    let scorer = ModelScorer::new(params);
    let limit = examples
        .iter()
        .flat_map(|e| e.references.iter().map(Vec::len))
        .max()
        .unwrap_or(1)
        + 2;
    let mut hits = 0;
    for e in examples {
        let out = greedy(&scorer, &e.input, limit)?;
        if e.references.contains(&out.tokens) {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len().max(1) as f64)
}

const CITIES: [&str; 10] = [
    "Lisbon", "Denver", "Osaka", "Nairobi", "Quebec", "Perth", "Bergen", "Austin", "Porto", "Tucson",
];
const GROUPS: [&str; 8] = [
    "city council",
    "transit agency",
    "school board",
    "health department",
    "water authority",
    "port commission",
    "parks service",
    "housing office",
];
const PLANS: [&str; 8] = [
    "a new budget",
    "a bike lane network",
    "longer library hours",
    "a flood barrier",
    "free bus fares",
    "a solar farm",
    "a hiring freeze",
    "a tree planting drive",
];
const DAYS: [&str; 5] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday"];

/// Templated news summaries with five valid reference pairs each (one of
/// them clearly the shortest question) plus, on some records, a pair that
/// breaks a writer rule.
pub fn news_corpus(records: usize, seed: u64) -> Vec<SummaryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..records)
        .map(|i| {
            let city = CITIES[rng.random_range(0..CITIES.len())];
            let group = GROUPS[rng.random_range(0..GROUPS.len())];
            let plan = PLANS[rng.random_range(0..PLANS.len())];
            let day = DAYS[rng.random_range(0..DAYS.len())];
            let summary = format!(
                "The {group} in {city} announced {plan} on {day}. Officials said the plan would start next month."
            );
            let mut references = vec![
                QaPair::new(format!("In which city did the {group} announce {plan}?"), city),
                QaPair::new(format!("What did the {group} in {city} announce?"), plan),
                QaPair::new(format!("On which day did the {city} {group} announce its plan?"), day),
                QaPair::new(
                    format!("Which group in {city} announced {plan}?"),
                    format!("the {group}"),
                ),
                QaPair::new(format!("Where is the {group}?"), city),
            ];
            match i % 4 {
                1 => references.insert(2, QaPair::new(format!("Did the {group} announce {plan}?"), "Yes")),
                3 => references.push(QaPair::new(
                    "What did the officials say according to the passage?",
                    "a start date.",
                )),
                _ => {}
            }
            SummaryRecord {
                id: format!("news-{i:03}"),
                summary,
                style: StyleLabel::NewsQuizQA,
                references,
            }
        })
        .collect()
}
