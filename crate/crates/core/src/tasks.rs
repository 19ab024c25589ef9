//! Turning corpus records into token-level training examples.
//!
//! Two tasks share the same model: question-answer generation reads the
//! style-prefixed summary and writes `question <sep> answer`; the closed-book
//! answer task reads only a question and writes its answer, which is what
//! distractor sampling needs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{apply_style_prefix, SummaryRecord};
use crate::multiref::TrainExample;
use crate::seq2seq::{ModelError, TokenId, Vocab};
use crate::text_metrics::{tokenize, QaSplitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextTask {
    QuestionAnswer,
    Answer,
}

impl FromStr for TextTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa" | "question-answer" => Ok(TextTask::QuestionAnswer),
            "answer" => Ok(TextTask::Answer),
            other => Err(format!("unknown task {other:?} (expected qa or answer)")),
        }
    }
}

fn words(text: &str) -> Vec<String> {
    tokenize(text).into_inner()
}

/// Source and target word sequences of every training pair, before ids.
fn text_pairs(
    records: &[SummaryRecord],
    task: TextTask,
    sep: &QaSplitConfig,
) -> Vec<(String, Vec<String>, Vec<Vec<String>>)> {
    match task {
        TextTask::QuestionAnswer => records
            .iter()
            .map(|r| {
                let targets = r
                    .references
                    .iter()
                    .map(|p| {
                        let mut t = words(&p.question);
                        t.push(sep.separator().to_string());
                        t.extend(words(&p.answer));
                        t
                    })
                    .collect();
                (r.id.clone(), words(&apply_style_prefix(r)), targets)
            })
            .collect(),
        TextTask::Answer => records
            .iter()
            .flat_map(|r| {
                r.references
                    .iter()
                    .enumerate()
                    .map(move |(i, p)| (format!("{}#{i}", r.id), words(&p.question), vec![words(&p.answer)]))
            })
            .collect(),
    }
}

/// Reserved symbols, the separator (question-answer task only), then every
/// word of the training pairs in first-seen order.
pub fn build_vocab(records: &[SummaryRecord], task: TextTask, sep: &QaSplitConfig) -> Result<Vocab, ModelError> {
    let mut all = Vec::new();
    if task == TextTask::QuestionAnswer {
        all.push(sep.separator().to_string());
    }
    for (_, input, targets) in text_pairs(records, task, sep) {
        all.extend(input);
        all.extend(targets.into_iter().flatten());
    }
    Vocab::with_words(all)
}

/// Training examples for `task`. Out-of-vocabulary words are dropped from
/// inputs and targets.
pub fn text_examples(
    records: &[SummaryRecord],
    vocab: &Vocab,
    task: TextTask,
    sep: &QaSplitConfig,
) -> Vec<TrainExample> {
    let ids = |ws: &[String]| -> Vec<TokenId> { ws.iter().filter_map(|w| vocab.id(w)).collect() };
    text_pairs(records, task, sep)
        .into_iter()
        .map(|(id, input, targets)| TrainExample {
            id,
            input: ids(&input),
            references: targets
                .iter()
                .map(|t| {
                    let mut seq = ids(t);
                    seq.push(vocab.eos());
                    seq
                })
                .collect(),
        })
        .collect()
}
