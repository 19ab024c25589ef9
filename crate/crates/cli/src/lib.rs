//! The `quizsmith` command line: batch jobs over JSONL files and the HTTP
//! service behind the curation console.
//!
//! [`run`] returns the process exit code: 0 on success, 1 on a usage error,
//! 2 on a data error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod jsonl;
pub mod serve;
pub mod store;

pub use store::BatchStore;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable that takes precedence over `--data-dir`.
pub const DATA_DIR_ENV: &str = "QUIZSMITH_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "quizsmith",
    version,
    about = "Quiz generation toolkit",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Seed for every random choice a subcommand makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against references with ROUGE and ROUGE-QAG.
    Metrics(commands::metrics::MetricsArgs),
    /// Validate, filter and split a quiz corpus.
    Pipeline(commands::pipeline::PipelineArgs),
    /// Train the toy model with a multi-reference strategy and trace it.
    TrainDemo(commands::train::TrainArgs),
    /// Decode inputs with beam search or sampling.
    Decode(commands::decode::DecodeArgs),
    /// Pick distractors for question/key pairs.
    Distract(commands::distract::DistractArgs),
    /// Rater statistics or survey aggregates.
    Stats(commands::stats::StatsArgs),
    /// Serve the curation API and the console's static files.
    Serve(ServeArgs),
    /// Create, curate and export batches from the command line.
    Curate(commands::curate::CurateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataDirArg {
    /// Directory holding `{batch_id}.json` files.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
}

impl DataDirArg {
    /// `QUIZSMITH_DATA_DIR` when set, otherwise the flag.
    pub fn resolve(&self) -> PathBuf {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.data_dir.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[command(flatten)]
    pub data: DataDirArg,
    /// Built console bundle served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Metrics(a) => commands::metrics::run(a),
        Command::Pipeline(a) => commands::pipeline::run(a, seed),
        Command::TrainDemo(a) => commands::train::run(a, seed),
        Command::Decode(a) => commands::decode::run(a, seed),
        Command::Distract(a) => commands::distract::run(a, seed),
        Command::Stats(a) => commands::stats::run(a),
        Command::Serve(a) => serve::run(a),
        Command::Curate(a) => commands::curate::run(a, seed),
    }
}
