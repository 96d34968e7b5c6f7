use std::path::PathBuf;

use lyrnet_core::corpus::{self, Corpus, VocabPolicy};
use lyrnet_core::eval::{self, EvaluationReport};
use lyrnet_core::model::EmotionModel;
use lyrnet_core::rng::SeedRng;
use lyrnet_core::train::train;
use serde::Serialize;

use crate::config::{self, FileConfig, ModelFlags, TrainFlags};
use crate::errors::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct AblateArgs {
    /// Labeled training corpus JSONL.
    #[arg(long)]
    pub train_data: PathBuf,
    /// Held-out split; carved from the training data (80/20) when omitted.
    #[arg(long)]
    pub validation_data: Option<PathBuf>,
    /// Receives ablation.json and run_manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub training: TrainFlags,
}

/// One cell pair of the comparison: the same task trained alone versus
/// jointly with the other two.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub task: String,
    pub metric: String,
    pub single_task: f64,
    pub multi_task: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

fn train_variant(
    name: &str,
    lambdas: (f64, f64, f64),
    corpus: &Corpus,
    holdout: &Corpus,
    file: &FileConfig,
    args: &AblateArgs,
    vocab_size: usize,
) -> Result<EvaluationReport, CliError> {
    let (encoder_config, head_config) = config::resolve_model(file, &args.model, vocab_size)?;
    let mut training_config = config::resolve_training(file, &args.training)?;
    training_config.lambdas = lambdas;
    let mut rng = SeedRng::new(training_config.seed);
    let mut model = EmotionModel::init(encoder_config, head_config, &mut rng)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!("ablation: training {name} variant (lambdas {lambdas:?})");
    train(&mut model, corpus, None, &training_config)?;
    Ok(eval::evaluate(&model, holdout)?)
}

pub fn run(args: &AblateArgs, file: &FileConfig) -> Result<(), CliError> {
    let (full, vocab) = corpus::load_corpus(&args.train_data, VocabPolicy::Build, None)?;
    let training_config = config::resolve_training(file, &args.training)?;
    let (train_split, holdout) = match &args.validation_data {
        Some(path) => {
            let (held, _) = corpus::load_corpus(path, VocabPolicy::Frozen, Some(vocab.clone()))?;
            (full, held)
        }
        None => {
            let mut parts = corpus::split(&full, &[0.8, 0.2], training_config.seed)?;
            let held = parts.pop().unwrap();
            (parts.pop().unwrap(), held)
        }
    };

    let multi = train_variant(
        "multi-task",
        (1.0, 1.0, 1.0),
        &train_split,
        &holdout,
        file,
        args,
        vocab.len(),
    )?;
    let single_q = train_variant(
        "quadrant-only",
        (1.0, 0.0, 0.0),
        &train_split,
        &holdout,
        file,
        args,
        vocab.len(),
    )?;
    let single_v = train_variant(
        "valence-only",
        (0.0, 1.0, 0.0),
        &train_split,
        &holdout,
        file,
        args,
        vocab.len(),
    )?;
    let single_a = train_variant(
        "arousal-only",
        (0.0, 0.0, 1.0),
        &train_split,
        &holdout,
        file,
        args,
        vocab.len(),
    )?;

    let mut rows = Vec::new();
    let pairs = [
        ("quadrant", &multi.quadrant, &single_q.quadrant),
        ("valence", &multi.valence, &single_v.valence),
        ("arousal", &multi.arousal, &single_a.arousal),
    ];
    for (task, m, s) in pairs {
        for (metric, mv, sv) in [
            ("accuracy", m.accuracy, s.accuracy),
            ("macro_f1", m.macro_f1, s.macro_f1),
        ] {
            rows.push(AblationRow {
                task: task.to_string(),
                metric: metric.to_string(),
                single_task: sv,
                multi_task: mv,
                delta: mv - sv,
            });
        }
    }

    eprintln!("{:<10} {:<10} {:>8} {:>8} {:>8}", "task", "metric", "single", "multi", "delta");
    for r in &rows {
        eprintln!(
            "{:<10} {:<10} {:>8.3} {:>8.3} {:>+8.3}",
            r.task, r.metric, r.single_task, r.multi_task, r.delta
        );
    }

    std::fs::create_dir_all(&args.out_dir)?;
    let report_path = args.out_dir.join("ablation.json");
    let report = AblationReport { rows };
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;

    let mut manifest = RunManifest::new(
        "ablate",
        serde_json::json!({ "training": training_config }),
        Some(training_config.seed),
    );
    manifest.add_input(&args.train_data);
    if let Some(v) = &args.validation_data {
        manifest.add_input(v);
    }
    manifest.add_artifact(&report_path)?;
    manifest.write(&args.out_dir.join("run_manifest.json"))?;
    Ok(())
}
