use std::path::PathBuf;

use lyrnet_core::corpus::{self, VocabPolicy};
use lyrnet_core::eval::{self, TaskMetrics};
use lyrnet_core::train::load_checkpoint;
use serde::Serialize;

use crate::errors::CliError;
use crate::manifest::{sibling_manifest_path, RunManifest};

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary JSON saved alongside the checkpoint.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Labeled corpus JSONL to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Report JSON destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also dump per-document predictions as JSONL.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

/// The compact per-task block the report exposes for each task.
#[derive(Debug, Serialize)]
pub struct TaskReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub macro_f1: f64,
}

impl TaskReport {
    pub fn of(m: &TaskMetrics) -> TaskReport {
        TaskReport {
            accuracy: m.accuracy,
            precision: m.macro_precision,
            recall: m.macro_recall,
            macro_f1: m.macro_f1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliReport {
    pub n_examples: usize,
    pub quadrant: TaskReport,
    pub valence: TaskReport,
    pub arousal: TaskReport,
    pub quadrant_hemisphere_agreement: f64,
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let vocab = super::load_vocab(&args.vocab)?;
    let model = load_checkpoint(&args.model)?;
    let (corpus, _) = corpus::load_corpus(&args.data, VocabPolicy::Frozen, Some(vocab))?;

    let preds = eval::predict_corpus(&model, &corpus)?;
    let report = eval::report_from_predictions(&preds)?;
    let cli_report = CliReport {
        n_examples: report.n_examples,
        quadrant: TaskReport::of(&report.quadrant),
        valence: TaskReport::of(&report.valence),
        arousal: TaskReport::of(&report.arousal),
        quadrant_hemisphere_agreement: report.quadrant_hemisphere_agreement,
    };
    let json = serde_json::to_string_pretty(&cli_report)? + "\n";

    eprintln!(
        "evaluated {} documents: quadrant macro-F1 {:.3}, valence {:.3}, arousal {:.3}",
        report.n_examples, report.quadrant.macro_f1, report.valence.macro_f1, report.arousal.macro_f1
    );

    let mut manifest = RunManifest::new("evaluate", serde_json::json!({}), None);
    manifest.add_input(&args.model);
    manifest.add_input(&args.data);

    if let Some(pred_path) = &args.predictions {
        let f = std::fs::File::create(pred_path)?;
        eval::write_predictions(std::io::BufWriter::new(f), &preds)?;
        manifest.add_artifact(pred_path)?;
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &json)?;
            manifest.add_artifact(path)?;
            manifest.write(&sibling_manifest_path(path))?;
        }
        None => {
            print!("{json}");
            if let Some(pred_path) = &args.predictions {
                manifest.write(&sibling_manifest_path(pred_path))?;
            }
        }
    }
    Ok(())
}
