//! Quiz-generation toolkit.
//!
//! - [`text_metrics`]: ROUGE-N, ROUGE-L, multi-reference maxima and ROUGE-QAG.
//! - [`corpus`]: quiz corpus records, writer-rule checks, post-processing and splits.
//! - [`seq2seq`]: a linear next-token model with analytic gradients.
//! - [`multiref`]: minimum reference loss and baseline multi-reference training.
//! - [`decoding`]: length-normalized beam search and seeded sampling.
//! - [`distractor`]: oversample-then-farthest-point distractor selection.
//! - [`human_eval`]: rater statistics for distractor quality and survey aggregates.
//! - [`curation`]: curation batch rules and quiz export.
//! - [`tasks`]: corpus records as token-level training examples.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod corpus;
pub mod curation;
pub mod decoding;
pub mod distractor;
pub mod human_eval;
pub mod multiref;
pub mod seq2seq;
pub mod synthetic;
pub mod tasks;
pub mod text_metrics;

pub use corpus::{QaPair, StyleLabel, SummaryRecord};
pub use decoding::{DecodeConfig, Scorer};
pub use distractor::McQuestion;
pub use multiref::{LossMatrix, Strategy};
pub use text_metrics::{RougeScore, RougeVariant, TokenSeq};

// Each chapter of the guide becomes a module so that `cargo test --doc`
// runs its listings.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rouge.md")]
    mod rouge {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/min_ref_loss.md")]
    mod min_ref_loss {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/distractors.md")]
    mod distractors {}
    #[doc = include_str!("../../../book/src/human_eval.md")]
    mod human_eval {}
    #[doc = include_str!("../../../book/src/curation.md")]
    mod curation {}
}
