//! Human curation of generated questions.
//!
//! A curator receives a batch of ten questions, each with five distractor
//! candidates, keeps three questions and three distractors for each, and may
//! only make edits in three fixed categories. A curated batch exports as a
//! three-question quiz with seeded option order.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distractor::McQuestion;

pub const BATCH_QUESTIONS: usize = 10;
pub const CANDIDATE_DISTRACTORS: usize = 5;
pub const PICKED_QUESTIONS: usize = 3;
pub const PICKED_DISTRACTORS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurationError {
    #[error("batch id {0:?} must be non-empty ASCII letters, digits, '-' or '_'")]
    BadBatchId(String),
    #[error("a batch holds exactly {BATCH_QUESTIONS} questions, got {0}")]
    QuestionCount(usize),
    #[error("question {index} has {got} distractor candidates, expected {CANDIDATE_DISTRACTORS}")]
    CandidateCount { index: usize, got: usize },
    #[error("batch {0:?} has not been curated")]
    NotCurated(String),
    #[error("batch {0:?} is already curated")]
    AlreadyCurated(String),
}

pub fn is_valid_batch_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchStatus {
    Open,
    Curated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationBatch {
    pub batch_id: String,
    /// Root of the per-question option shuffle at export.
    pub seed: u64,
    pub candidates: Vec<McQuestion>,
    pub status: BatchStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<CurationResult>,
}

impl CurationBatch {
    pub fn new(batch_id: impl Into<String>, seed: u64, candidates: Vec<McQuestion>) -> Result<Self, CurationError> {
        let batch = CurationBatch {
            batch_id: batch_id.into(),
            seed,
            candidates,
            status: BatchStatus::Open,
            result: None,
        };
        batch.check_shape()?;
        Ok(batch)
    }

    pub fn check_shape(&self) -> Result<(), CurationError> {
        if !is_valid_batch_id(&self.batch_id) {
            return Err(CurationError::BadBatchId(self.batch_id.clone()));
        }
        if self.candidates.len() != BATCH_QUESTIONS {
            return Err(CurationError::QuestionCount(self.candidates.len()));
        }
        for (index, q) in self.candidates.iter().enumerate() {
            if q.distractors.len() != CANDIDATE_DISTRACTORS {
                return Err(CurationError::CandidateCount {
                    index,
                    got: q.distractors.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPick {
    pub question: usize,
    pub distractors: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditTarget {
    Question { question: usize },
    Key { question: usize },
    Distractor { question: usize, distractor: usize },
}

impl EditTarget {
    pub fn question(self) -> usize {
        match self {
            EditTarget::Question { question }
            | EditTarget::Key { question }
            | EditTarget::Distractor { question, .. } => question,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditCategory {
    GrammarSpelling,
    ClarifySourceDate,
    DistractorFormatting,
}

impl EditCategory {
    pub const ALL: [EditCategory; 3] = [
        EditCategory::GrammarSpelling,
        EditCategory::ClarifySourceDate,
        EditCategory::DistractorFormatting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EditCategory::GrammarSpelling => "GRAMMAR_SPELLING",
            EditCategory::ClarifySourceDate => "CLARIFY_SOURCE_DATE",
            EditCategory::DistractorFormatting => "DISTRACTOR_FORMATTING",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EditCategory::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// An edit as submitted. The category stays a raw string so that unknown
/// categories surface as violations rather than decode failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub target: EditTarget,
    pub before: String,
    pub after: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationResult {
    pub batch_id: String,
    pub selections: Vec<QuestionPick>,
    #[serde(default)]
    pub edits: Vec<Edit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    BatchNotOpen,
    BatchIdMismatch,
    PickCount,
    DistractorPickCount,
    DuplicatePick,
    PickOutOfRange,
    EditCategory,
    EditUnselectedTarget,
    EditEmpty,
    EditBeforeMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.detail)
    }
}

fn text_of(q: &McQuestion, target: EditTarget) -> Option<&str> {
    match target {
        EditTarget::Question { .. } => Some(&q.question),
        EditTarget::Key { .. } => Some(&q.key),
        EditTarget::Distractor { distractor, .. } => q.distractors.get(distractor).map(String::as_str),
    }
}

fn text_of_mut(q: &mut McQuestion, target: EditTarget) -> Option<&mut String> {
    match target {
        EditTarget::Question { .. } => Some(&mut q.question),
        EditTarget::Key { .. } => Some(&mut q.key),
        EditTarget::Distractor { distractor, .. } => q.distractors.get_mut(distractor),
    }
}

/// Checks `result` against `batch`. Edits apply in order; each edit's
/// `before` must equal the target's text at that point.
pub fn validate_curation(batch: &CurationBatch, result: &CurationResult) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut flag = |code, detail: String| out.push(Violation { code, detail });

    if batch.status != BatchStatus::Open {
        flag(
            ViolationCode::BatchNotOpen,
            format!("batch {} is {:?}", batch.batch_id, batch.status),
        );
    }
    if result.batch_id != batch.batch_id {
        flag(
            ViolationCode::BatchIdMismatch,
            format!("result names {:?}, batch is {:?}", result.batch_id, batch.batch_id),
        );
    }
    if result.selections.len() != PICKED_QUESTIONS {
        flag(
            ViolationCode::PickCount,
            format!(
                "{} questions picked, exactly {PICKED_QUESTIONS} required",
                result.selections.len()
            ),
        );
    }
    let mut questions = BTreeSet::new();
    for pick in &result.selections {
        if pick.question >= batch.candidates.len() {
            flag(
                ViolationCode::PickOutOfRange,
                format!("question {} does not exist", pick.question),
            );
        } else if !questions.insert(pick.question) {
            flag(
                ViolationCode::DuplicatePick,
                format!("question {} picked twice", pick.question),
            );
        }
        if pick.distractors.len() != PICKED_DISTRACTORS {
            flag(
                ViolationCode::DistractorPickCount,
                format!(
                    "question {}: {} distractors picked, exactly {PICKED_DISTRACTORS} required",
                    pick.question,
                    pick.distractors.len()
                ),
            );
        }
        let mut seen = BTreeSet::new();
        for &d in &pick.distractors {
            if d >= CANDIDATE_DISTRACTORS {
                flag(
                    ViolationCode::PickOutOfRange,
                    format!("question {}: distractor {d} does not exist", pick.question),
                );
            } else if !seen.insert(d) {
                flag(
                    ViolationCode::DuplicatePick,
                    format!("question {}: distractor {d} picked twice", pick.question),
                );
            }
        }
    }

    let mut working = batch.candidates.clone();
    for (i, edit) in result.edits.iter().enumerate() {
        match EditCategory::parse(&edit.category) {
            None => flag(
                ViolationCode::EditCategory,
                format!("edit {i}: unknown category {:?}", edit.category),
            ),
            Some(EditCategory::DistractorFormatting) if !matches!(edit.target, EditTarget::Distractor { .. }) => flag(
                ViolationCode::EditCategory,
                format!("edit {i}: DISTRACTOR_FORMATTING applies to distractors only"),
            ),
            Some(_) => {}
        }
        let q = edit.target.question();
        let selected = result.selections.iter().find(|p| p.question == q);
        let target_selected = match (selected, edit.target) {
            (None, _) => false,
            (Some(p), EditTarget::Distractor { distractor, .. }) => p.distractors.contains(&distractor),
            (Some(_), _) => true,
        };
        if !target_selected {
            flag(
                ViolationCode::EditUnselectedTarget,
                format!("edit {i}: target {:?} is not selected", edit.target),
            );
            continue;
        }
        if edit.after.trim().is_empty() {
            flag(ViolationCode::EditEmpty, format!("edit {i}: edited text is empty"));
        }
        let Some(current) = working.get_mut(q).and_then(|mq| text_of_mut(mq, edit.target)) else {
            continue;
        };
        if *current != edit.before {
            flag(
                ViolationCode::EditBeforeMismatch,
                format!("edit {i}: before text {:?} does not match {:?}", edit.before, current),
            );
        }
        *current = edit.after.clone();
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Validates and, on success, marks the batch curated with `result`.
pub fn curate(batch: &mut CurationBatch, result: CurationResult) -> Result<(), Vec<Violation>> {
    validate_curation(batch, &result)?;
    batch.status = BatchStatus::Curated;
    batch.result = Some(result);
    Ok(())
}

/// Re-validates a curated batch's stored result as if it were still open.
pub fn replay(batch: &CurationBatch) -> Result<(), Vec<Violation>> {
    let Some(result) = &batch.result else {
        return Ok(());
    };
    let open = CurationBatch {
        status: BatchStatus::Open,
        result: None,
        ..batch.clone()
    };
    validate_curation(&open, result)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub question: String,
    pub options: Vec<String>,
    pub key_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quiz {
    pub batch_id: String,
    pub questions: Vec<QuizQuestion>,
}

/// Seed of the option shuffle for the `position`-th exported question.
pub fn question_seed(batch_seed: u64, position: usize) -> u64 {
    batch_seed ^ (position as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Final quiz of a curated batch: edited texts, options shuffled per
/// question with [`question_seed`].
pub fn export_quiz(batch: &CurationBatch) -> Result<Quiz, CurationError> {
    let result = match (&batch.status, &batch.result) {
        (BatchStatus::Curated, Some(r)) => r,
        _ => return Err(CurationError::NotCurated(batch.batch_id.clone())),
    };
    let mut edited = batch.candidates.clone();
    for edit in &result.edits {
        if let Some(t) = edited
            .get_mut(edit.target.question())
            .and_then(|q| text_of_mut(q, edit.target))
        {
            *t = edit.after.clone();
        }
    }
    let questions = result
        .selections
        .iter()
        .enumerate()
        .map(|(pos, pick)| {
            let q = &edited[pick.question];
            let mut options: Vec<(bool, String)> = vec![(true, q.key.clone())];
            options.extend(pick.distractors.iter().map(|&d| (false, q.distractors[d].clone())));
            options.shuffle(&mut ChaCha8Rng::seed_from_u64(question_seed(batch.seed, pos)));
            QuizQuestion {
                question: q.question.clone(),
                key_index: options.iter().position(|(is_key, _)| *is_key).expect("key is present"),
                options: options.into_iter().map(|(_, text)| text).collect(),
            }
        })
        .collect();
    Ok(Quiz {
        batch_id: batch.batch_id.clone(),
        questions,
    })
}

/// Current text of a target, if it exists.
pub fn target_text(batch: &CurationBatch, target: EditTarget) -> Option<&str> {
    batch.candidates.get(target.question()).and_then(|q| text_of(q, target))
}
