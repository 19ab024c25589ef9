use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use quizsmith::corpus::{postprocess_corpus, read_corpus_mapped, split_corpus, write_corpus, FieldMapping};
use serde_json::json;

use crate::jsonl::{output, read_json, write_json};

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Raw corpus JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Receives `processed.jsonl` and `split.json`.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// JSON field mapping for corpora in another schema.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

/// Collapses runs of whitespace. Stands in for a grammar corrector.
fn tidy(question: &str) -> String {
    question.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn run(args: PipelineArgs, seed: u64) -> Result<()> {
    let mapping: FieldMapping = match &args.mapping {
        Some(p) => read_json(p)?,
        None => FieldMapping::default(),
    };
    let file = File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let raw = read_corpus_mapped(BufReader::new(file), &mapping)?;
    let processed = postprocess_corpus(&raw, tidy);
    let split = split_corpus(&processed, seed).context("nothing survived post-processing")?;

    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let processed_path = args.out_dir.join("processed.jsonl");
    let mut w = output(Some(&processed_path))?;
    write_corpus(&mut w, &processed)?;
    w.flush()?;
    write_json(output(Some(&args.out_dir.join("split.json")))?, &split)?;

    let (train, validation, test) = split.sizes();
    write_json(
        output(None)?,
        &json!({
            "input_records": raw.len(),
            "kept_records": processed.len(),
            "train": train,
            "validation": validation,
            "test": test,
        }),
    )
}
