use std::io::Write;
use std::path::PathBuf;

use lyrnet_core::corpus::{self, VocabPolicy};
use lyrnet_core::model::EmotionModel;
use lyrnet_core::rng::SeedRng;
use lyrnet_core::train::{save_checkpoint, Precision};
use lyrnet_core::train::{train, EpochLog};

use crate::config::{self, FileConfig, ModelFlags, TrainFlags};
use crate::errors::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PrecisionArg {
    F64,
    F32,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Labeled training corpus JSONL.
    #[arg(long)]
    pub train_data: PathBuf,
    /// Optional held-out split for per-epoch macro-F1 and early stopping.
    #[arg(long)]
    pub validation_data: Option<PathBuf>,
    /// Receives model.ckpt, vocab.json, loss_log.jsonl, run_manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Checkpoint storage width.
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub training: TrainFlags,
}

pub fn write_loss_log(path: &PathBuf, log: &[EpochLog]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path)?;
    for entry in log {
        writeln!(f, "{}", serde_json::to_string(entry)?)?;
    }
    Ok(())
}

pub fn run(args: &TrainArgs, file: &FileConfig) -> Result<(), CliError> {
    let (corpus, vocab) = corpus::load_corpus(&args.train_data, VocabPolicy::Build, None)?;
    let validation = args
        .validation_data
        .as_ref()
        .map(|p| corpus::load_corpus(p, VocabPolicy::Frozen, Some(vocab.clone())))
        .transpose()?
        .map(|(c, _)| c);

    let (encoder_config, head_config) = config::resolve_model(file, &args.model, vocab.len())?;
    let training_config = config::resolve_training(file, &args.training)?;

    let mut rng = SeedRng::new(training_config.seed);
    let mut model = EmotionModel::init(encoder_config.clone(), head_config.clone(), &mut rng)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    eprintln!(
        "training on {} documents ({} parameters, vocabulary {})",
        corpus.len(),
        model.param_count(),
        vocab.len()
    );
    let log = train(&mut model, &corpus, validation.as_ref(), &training_config)?;
    for entry in &log {
        match entry.validation_macro_f1 {
            Some(f1) => eprintln!(
                "epoch {:>3}: loss {:.4} quadrant acc {:.3} validation macro-F1 {:.3}",
                entry.epoch, entry.total_loss, entry.quadrant_accuracy, f1
            ),
            None => eprintln!(
                "epoch {:>3}: loss {:.4} quadrant acc {:.3}",
                entry.epoch, entry.total_loss, entry.quadrant_accuracy
            ),
        }
    }

    std::fs::create_dir_all(&args.out_dir)?;
    let ckpt_path = args.out_dir.join("model.ckpt");
    let vocab_path = args.out_dir.join("vocab.json");
    let log_path = args.out_dir.join("loss_log.jsonl");
    let precision = match args.precision {
        PrecisionArg::F64 => Precision::F64,
        PrecisionArg::F32 => Precision::F32,
    };
    save_checkpoint(&mut model, precision, &ckpt_path)?;
    super::save_vocab(&vocab_path, &vocab)?;
    write_loss_log(&log_path, &log)?;

    let mut manifest = RunManifest::new(
        "train",
        serde_json::json!({
            "encoder": encoder_config,
            "head": head_config,
            "training": training_config,
            "precision": format!("{:?}", args.precision).to_lowercase(),
        }),
        Some(training_config.seed),
    );
    manifest.add_input(&args.train_data);
    if let Some(v) = &args.validation_data {
        manifest.add_input(v);
    }
    for artifact in [&ckpt_path, &vocab_path, &log_path] {
        manifest.add_artifact(artifact)?;
    }
    manifest.write(&args.out_dir.join("run_manifest.json"))?;
    eprintln!("wrote checkpoint to {}", ckpt_path.display());
    Ok(())
}
