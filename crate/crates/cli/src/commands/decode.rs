use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use quizsmith::corpus::{style_prefixed, StyleLabel};
use quizsmith::decoding::{beam_search, sample, DecodeConfig, ModelScorer};
use quizsmith::seq2seq::{ModelParams, ParamsJson};
use serde::Serialize;
use serde_json::Value;

use crate::jsonl::{output, read_json, read_jsonl, write_jsonl};

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Parameters written by `train-demo`.
    #[arg(long)]
    pub params: PathBuf,
    /// Rows with `input` text, or corpus records (`summary`, `style`).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub beams: usize,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    #[arg(long, default_value_t = 128)]
    pub max_len: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Sample at `--temperature` instead of running beam search.
    #[arg(long)]
    pub sample: bool,
    /// Decode only the first N rows.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Decoded {
    pub id: String,
    pub prediction: String,
    pub tokens: Vec<String>,
    pub log_prob: f64,
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    let json: ParamsJson = read_json(path)?;
    ModelParams::from_json(json).with_context(|| format!("{}: bad parameters", path.display()))
}

/// Id and model input text of one row.
fn row_input(row: &Value, line: usize) -> Result<(String, String)> {
    let id = match row.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => line.to_string(),
    };
    if let Some(text) = row.get("input").and_then(Value::as_str) {
        return Ok((id, text.to_string()));
    }
    let Some(summary) = row.get("summary").and_then(Value::as_str) else {
        bail!("row {line} has neither \"input\" nor \"summary\"");
    };
    let style = match row.get("style").and_then(Value::as_str) {
        Some(s) => s.parse()?,
        None => StyleLabel::NewsQuizQA,
    };
    Ok((id, style_prefixed(style, summary)))
}

pub fn run(args: DecodeArgs, seed: u64) -> Result<()> {
    let params = load_params(&args.params)?;
    let config = DecodeConfig {
        beams: args.beams,
        alpha: args.alpha,
        max_len: args.max_len,
        temperature: args.temperature,
    };
    config.validate()?;
    let scorer = ModelScorer::new(&params);
    let vocab = params.vocab();
    let mut rows: Vec<Value> = read_jsonl(&args.input)?;
    if let Some(n) = args.limit {
        rows.truncate(n);
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (id, text) = row_input(row, i)?;
        let input = vocab.encode_text_lossy(&text);
        let hyp = if args.sample {
            sample(&scorer, &input, &config, seed.wrapping_add(i as u64))?
        } else {
            beam_search(&scorer, &input, &config)?
        };
        let tokens: Vec<String> = hyp
            .tokens
            .iter()
            .take_while(|&&t| t != vocab.eos())
            .filter_map(|&t| vocab.symbol(t).map(str::to_string))
            .collect();
        out.push(Decoded {
            id,
            prediction: vocab.decode(&hyp.tokens),
            tokens,
            log_prob: hyp.log_prob,
        });
    }
    write_jsonl(output(args.out.as_ref())?, &out)
}
