use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use quizsmith::text_metrics::{rouge_combined, rouge_qag, QaSplitConfig, RougeVariant};
use quizsmith::QaPair;
use serde::Deserialize;

use crate::jsonl::{output, read_jsonl, write_json};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predictions, one `{"prediction": "question <sep> answer"}` per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// References, one `{"references": [{"question", "answer"}, ...]}` per line.
    #[arg(long = "ref")]
    pub refs: PathBuf,
    #[arg(long, default_value = QaSplitConfig::DEFAULT_SEPARATOR)]
    pub separator: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PredictionRow {
    Text(String),
    Object { prediction: String },
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    references: Vec<QaPair>,
}

const VARIANTS: [(&str, RougeVariant); 3] = [
    ("R1", RougeVariant::ROUGE_1),
    ("R2", RougeVariant::ROUGE_2),
    ("RL", RougeVariant::L),
];

/// Corpus-level means of per-prediction scores, keyed `R1-F`, `R1-F-QAG`
/// and so on, plus `avg_length` in characters and `count`.
pub fn report(
    predictions: &[String],
    references: &[Vec<QaPair>],
    sep: &QaSplitConfig,
) -> Result<BTreeMap<String, f64>> {
    if predictions.len() != references.len() {
        bail!(
            "{} predictions but {} reference rows",
            predictions.len(),
            references.len()
        );
    }
    if predictions.is_empty() {
        bail!("no predictions");
    }
    let n = predictions.len() as f64;
    let mut out = BTreeMap::new();
    for (name, variant) in VARIANTS {
        let mut plain = 0.0;
        let mut qag = 0.0;
        for (p, r) in predictions.iter().zip(references) {
            plain += rouge_combined(p, r, variant, sep)?;
            qag += rouge_qag(p, r, variant, sep)?;
        }
        out.insert(format!("{name}-F"), plain / n);
        out.insert(format!("{name}-F-QAG"), qag / n);
    }
    let chars: usize = predictions.iter().map(|p| p.chars().count()).sum();
    out.insert("avg_length".into(), chars as f64 / n);
    out.insert("count".into(), n);
    Ok(out)
}

pub fn run(args: MetricsArgs) -> Result<()> {
    let sep = QaSplitConfig::new(args.separator)?;
    let predictions: Vec<String> = read_jsonl::<PredictionRow>(&args.pred)?
        .into_iter()
        .map(|r| match r {
            PredictionRow::Text(t) | PredictionRow::Object { prediction: t } => t,
        })
        .collect();
    let references: Vec<Vec<QaPair>> = read_jsonl::<ReferenceRow>(&args.refs)?
        .into_iter()
        .map(|r| r.references)
        .collect();
    let report = report(&predictions, &references, &sep)?;
    write_json(output(args.out.as_ref())?, &report)
}
