use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use quizsmith::curation::{CurationBatch, CurationResult};
use quizsmith::McQuestion;

use crate::jsonl::{output, read_json, read_jsonl, write_json};
use crate::store::BatchStore;
use crate::DataDirArg;

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[command(flatten)]
    pub data: DataDirArg,
    #[command(subcommand)]
    pub action: CurateAction,
}

#[derive(Debug, Subcommand)]
pub enum CurateAction {
    /// Store a new open batch from `distract` output (exactly 10 rows with
    /// 5 distractors each). The export shuffle is rooted at `--seed`.
    Create {
        #[arg(long)]
        batch_id: String,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// List stored batches.
    List,
    /// Print one batch.
    Show {
        #[arg(long)]
        batch_id: String,
    },
    /// Validate and store a curation result JSON document.
    Submit {
        #[arg(long)]
        batch_id: String,
        #[arg(long)]
        result: PathBuf,
    },
    /// Print the final quiz of a curated batch.
    Export {
        #[arg(long)]
        batch_id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(args: CurateArgs, seed: u64) -> Result<()> {
    let store = BatchStore::new(args.data.resolve());
    match args.action {
        CurateAction::Create { batch_id, input } => {
            let candidates: Vec<McQuestion> = read_jsonl(&input)?;
            let batch = CurationBatch::new(batch_id, seed, candidates)?;
            store.create(&batch)?;
            write_json(output(None)?, &batch)
        }
        CurateAction::List => write_json(output(None)?, &store.list()?),
        CurateAction::Show { batch_id } => write_json(output(None)?, &store.get(&batch_id)?),
        CurateAction::Submit { batch_id, result } => {
            let result: CurationResult = read_json(&result)?;
            let batch = store.submit(&batch_id, result)?;
            write_json(output(None)?, &batch)
        }
        CurateAction::Export { batch_id, out } => write_json(output(out.as_ref())?, &store.export(&batch_id)?),
    }
}
