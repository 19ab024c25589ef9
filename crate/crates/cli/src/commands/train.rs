use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use quizsmith::corpus::{read_corpus, SplitAssignment, SummaryRecord};
use quizsmith::multiref::{train, BatchReduction, TrainConfig, TrainExample};
use quizsmith::seq2seq::ModelParams;
use quizsmith::synthetic::{exact_match_rate, multi_reference_task, TaskShape};
use quizsmith::tasks::{build_vocab, text_examples, TextTask};
use quizsmith::text_metrics::QaSplitConfig;
use quizsmith::Strategy;
use serde_json::json;

use crate::jsonl::{output, read_json, write_json, write_jsonl};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Part {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    /// `question <sep> answer` from the style-prefixed summary.
    Qa,
    /// The answer from the question alone.
    Answer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReductionArg {
    Sum,
    Mean,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Processed corpus JSONL. Without it the built-in synthetic
    /// multi-reference task is used.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Split manifest written by `pipeline`.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    pub part: Part,
    #[arg(long, value_enum, default_value = "qa")]
    pub task: TaskArg,
    /// DISAGGREGATE, SAMPLE_ONE, MIN_REF or MIN_REF_UNNORM.
    #[arg(long, default_value = "MIN_REF", value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long = "lr", default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Maximum reference rows per batch.
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "sum")]
    pub reduction: ReductionArg,
    #[arg(long, default_value = QaSplitConfig::DEFAULT_SEPARATOR)]
    pub separator: String,
    /// Trace JSONL destination; stdout when absent.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Where to write the trained parameters.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: quizsmith::multiref::TrainError| e.to_string())
}

fn select(records: Vec<SummaryRecord>, split: Option<&SplitAssignment>, part: Part) -> Vec<SummaryRecord> {
    let Some(split) = split else {
        return records;
    };
    let ids = match part {
        Part::Train => &split.train,
        Part::Validation => &split.validation,
        Part::Test => &split.test,
        Part::All => return records,
    };
    records.into_iter().filter(|r| ids.contains(&r.id)).collect()
}

fn corpus_task(args: &TrainArgs, path: &PathBuf) -> Result<(ModelParams, Vec<TrainExample>)> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let records = read_corpus(BufReader::new(file))?;
    let split: Option<SplitAssignment> = args.split.as_deref().map(read_json).transpose()?;
    let records = select(records, split.as_ref(), args.part);
    if records.is_empty() {
        bail!("no training records selected");
    }
    let task = match args.task {
        TaskArg::Qa => TextTask::QuestionAnswer,
        TaskArg::Answer => TextTask::Answer,
    };
    let sep = QaSplitConfig::new(args.separator.clone())?;
    let vocab = build_vocab(&records, task, &sep)?;
    let examples = text_examples(&records, &vocab, task, &sep);
    Ok((ModelParams::zeros(vocab), examples))
}

pub fn run(args: TrainArgs, seed: u64) -> Result<()> {
    let (params, examples) = match &args.corpus {
        Some(path) => corpus_task(&args, path)?,
        None => {
            let task = multi_reference_task(TaskShape::default(), seed);
            (ModelParams::zeros(task.vocab), task.examples)
        }
    };
    let config = TrainConfig {
        steps: args.steps,
        learning_rate: args.learning_rate,
        seed,
        batch_size: args.batch_size,
        reduction: match args.reduction {
            ReductionArg::Sum => BatchReduction::Sum,
            ReductionArg::Mean => BatchReduction::Mean,
        },
    };
    let outcome = train(args.strategy, params, &examples, &config)?;
    write_jsonl(output(args.trace.as_ref())?, &outcome.trace)?;
    if let Some(path) = &args.params_out {
        write_json(output(Some(path))?, &outcome.params.to_json())?;
    }
    let summary = json!({
        "strategy": args.strategy.name(),
        "examples": examples.len(),
        "steps": config.steps,
        "exact_match": exact_match_rate(&outcome.params, &examples)?,
    });
    eprintln!("{summary}");
    Ok(())
}
