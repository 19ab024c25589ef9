use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::Args;
use quizsmith::decoding::{DecodeConfig, ModelScorer};
use quizsmith::distractor::{build_mcq, select_distractors, CommandEmbedder, Embedder, TrigramEmbedder};
use quizsmith::seq2seq::ModelParams;
use quizsmith::text_metrics::QaSplitConfig;
use quizsmith::McQuestion;
use serde::{Deserialize, Serialize};

use super::decode::load_params;
use crate::jsonl::{output, read_jsonl, write_jsonl};

#[derive(Debug, Args)]
pub struct DistractArgs {
    /// Rows with `question` and `key` (and optionally `candidates`), or
    /// `decode` output whose `prediction` holds `question <sep> key`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Distractors per question.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// `trigram` or `command:<path>`.
    #[arg(long, default_value = "trigram")]
    pub embedder: String,
    /// Trigram embedding width.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    /// Closed-book answer model used to sample candidates for rows that
    /// carry none.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    #[arg(long, default_value = QaSplitConfig::DEFAULT_SEPARATOR)]
    pub separator: String,
    /// Report rows without enough usable candidates on stderr and go on.
    #[arg(long)]
    pub skip_failed: bool,
}

#[derive(Debug, Deserialize)]
struct Row {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    key: Option<String>,
    #[serde(default)]
    prediction: Option<String>,
    #[serde(default)]
    candidates: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct Output<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    #[serde(flatten)]
    mcq: &'a McQuestion,
}

fn embedder(spec: &str, dim: usize) -> Result<Box<dyn Embedder>> {
    match spec {
        "trigram" => Ok(Box::new(TrigramEmbedder { dim })),
        other => match other.strip_prefix("command:") {
            Some(program) if !program.is_empty() => Ok(Box::new(CommandEmbedder {
                program: program.to_string(),
            })),
            _ => bail!("unknown embedder {other:?} (expected trigram or command:<path>)"),
        },
    }
}

fn question_and_key(row: &Row, sep: &QaSplitConfig, line: usize) -> Result<(String, String)> {
    if let (Some(q), Some(k)) = (&row.question, &row.key) {
        return Ok((q.clone(), k.clone()));
    }
    let prediction = row
        .prediction
        .as_deref()
        .ok_or_else(|| anyhow!("row {line} needs question and key, or a prediction"))?;
    let (q, k) = sep
        .split(prediction)
        .ok_or_else(|| anyhow!("row {line}: prediction has no {:?}", sep.separator()))?;
    let (q, k) = (q.trim(), k.trim());
    if q.is_empty() || k.is_empty() {
        bail!("row {line}: prediction has an empty question or answer");
    }
    Ok((q.to_string(), k.to_string()))
}

fn one(
    row: &Row,
    line: usize,
    args: &DistractArgs,
    sep: &QaSplitConfig,
    embedder: &dyn Embedder,
    model: Option<&ModelParams>,
    seed: u64,
) -> Result<McQuestion> {
    let (question, key) = question_and_key(row, sep, line)?;
    if let Some(candidates) = &row.candidates {
        let distractors = select_distractors(&key, candidates, args.k, embedder)?;
        return Ok(McQuestion {
            question,
            key,
            distractors,
        });
    }
    let params = model.ok_or_else(|| anyhow!("row {line} has no candidates and no --params model was given"))?;
    let config = DecodeConfig {
        max_len: args.max_len,
        temperature: args.temperature,
        ..DecodeConfig::distractor()
    };
    // rows draw from disjoint seed ranges
    let row_seed = seed.wrapping_add((line as u64) << 32);
    let mcq = build_mcq(
        &question,
        &key,
        &ModelScorer::new(params),
        params.vocab(),
        args.k,
        &config,
        row_seed,
        embedder,
    )?;
    Ok(mcq)
}

pub fn run(args: DistractArgs, seed: u64) -> Result<()> {
    let sep = QaSplitConfig::new(args.separator.clone())?;
    let embedder = embedder(&args.embedder, args.dim)?;
    let model = args.params.as_deref().map(load_params).transpose()?;
    let rows: Vec<Row> = read_jsonl(&args.input)?;
    let mut out = Vec::new();
    for (line, row) in rows.iter().enumerate() {
        match one(row, line, &args, &sep, embedder.as_ref(), model.as_ref(), seed) {
            Ok(mcq) => out.push((row.id.clone(), mcq)),
            Err(e) if args.skip_failed => eprintln!("skipping row {line}: {e:#}"),
            Err(e) => return Err(e.context(format!("row {line}"))),
        }
    }
    let rendered = out.iter().map(|(id, mcq)| Output { id: id.as_deref(), mcq });
    write_jsonl(output(args.out.as_ref())?, rendered)
}
