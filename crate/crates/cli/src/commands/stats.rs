use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use quizsmith::human_eval::{aggregate_ratings, compute_stats, QuestionOptions, RatingRecord};
use serde::Deserialize;
use serde_json::json;

use crate::jsonl::{output, read_jsonl, write_json};

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Rating JSONL: `rater_id`, `question_id`, `marked`, `overlap_flags`.
    #[arg(long, required_unless_present = "survey")]
    pub ratings: Option<PathBuf>,
    /// Question JSONL: `question_id`, `key_option`, `distractor_options`.
    #[arg(long, required_unless_present = "survey")]
    pub questions: Option<PathBuf>,
    /// Survey responses (1 to 5), one number or `{"response": n}` per line.
    #[arg(long, conflicts_with_all = ["ratings", "questions"])]
    pub survey: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Response {
    Bare(i64),
    Object { response: i64 },
}

pub fn run(args: StatsArgs) -> Result<()> {
    let out = output(args.out.as_ref())?;
    if let Some(path) = &args.survey {
        let responses: Vec<i64> = read_jsonl::<Response>(path)?
            .into_iter()
            .map(|r| match r {
                Response::Bare(n) | Response::Object { response: n } => n,
            })
            .collect();
        let (mean, margin) = aggregate_ratings(&responses)?;
        return write_json(out, &json!({ "n": responses.len(), "mean": mean, "margin": margin }));
    }
    let (Some(ratings), Some(questions)) = (&args.ratings, &args.questions) else {
        bail!("--ratings and --questions are both required");
    };
    let ratings: Vec<RatingRecord> = read_jsonl(ratings)?;
    let questions: Vec<QuestionOptions> = read_jsonl(questions)?;
    write_json(out, &compute_stats(&ratings, &questions)?)
}
