use std::io::{BufRead, Write};
use std::path::PathBuf;

use lyrnet_core::corpus::{self, quadrant_of, Arousal, Quadrant, Valence, MAX_TOKENS};
use lyrnet_core::heads;
use lyrnet_core::rng::SeedRng;
use lyrnet_core::tensor::Mode;
use lyrnet_core::train::load_checkpoint;
use lyrnet_core::EmotionModel;
use serde::{Deserialize, Serialize};

use crate::errors::CliError;
use crate::manifest::{sibling_manifest_path, RunManifest};

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary JSON saved alongside the checkpoint.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Lyrics text given inline.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    /// JSONL of `{"id": ..., "lyrics": ...}` records.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSONL destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct InputRecord {
    id: String,
    lyrics: String,
}

/// One prediction: three task decisions, the eight raw logits, whether the
/// valence/arousal pair implies the predicted quadrant, and a degenerate
/// marker for inputs with no usable tokens.
#[derive(Debug, Serialize)]
pub struct Prediction {
    pub id: String,
    pub degenerate: bool,
    pub quadrant: Option<Quadrant>,
    pub valence: Option<Valence>,
    pub arousal: Option<Arousal>,
    pub quadrant_logits: Option<Vec<f64>>,
    pub valence_logits: Option<Vec<f64>>,
    pub arousal_logits: Option<Vec<f64>>,
    pub agreement: Option<bool>,
}

pub fn predict_one(
    model: &EmotionModel,
    vocab: &corpus::Vocabulary,
    id: &str,
    lyrics: &str,
) -> Result<Prediction, CliError> {
    let tokens = corpus::tokenize(lyrics, vocab, MAX_TOKENS);
    if tokens.is_empty() {
        return Ok(Prediction {
            id: id.to_string(),
            degenerate: true,
            quadrant: None,
            valence: None,
            arousal: None,
            quadrant_logits: None,
            valence_logits: None,
            arousal_logits: None,
            agreement: None,
        });
    }
    let mut rng = SeedRng::new(0); // eval mode never draws
    let logits = model.forward_doc(&tokens, Mode::Eval, &mut rng)?;
    let pred = heads::predict(&logits);
    let q = Quadrant::from_index(pred.quadrant).unwrap();
    let v = Valence::from_index(pred.valence).unwrap();
    let a = Arousal::from_index(pred.arousal).unwrap();
    Ok(Prediction {
        id: id.to_string(),
        degenerate: false,
        quadrant: Some(q),
        valence: Some(v),
        arousal: Some(a),
        quadrant_logits: Some(logits.quadrant.data().to_vec()),
        valence_logits: Some(logits.valence.data().to_vec()),
        arousal_logits: Some(logits.arousal.data().to_vec()),
        agreement: Some(quadrant_of(v, a) == q),
    })
}

pub fn run(args: &PredictArgs) -> Result<(), CliError> {
    let vocab = super::load_vocab(&args.vocab)?;
    let model = load_checkpoint(&args.model)?;

    let mut inputs: Vec<(String, String)> = Vec::new();
    match (&args.text, &args.input) {
        (Some(text), None) => inputs.push(("inline".to_string(), text.clone())),
        (None, Some(path)) => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: InputRecord = serde_json::from_str(&line).map_err(|e| {
                    CliError::Data(format!("{} line {}: {e}", path.display(), i + 1))
                })?;
                inputs.push((rec.id, rec.lyrics));
            }
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --text or --input".into(),
            ))
        }
    }
    if inputs.is_empty() {
        return Err(CliError::Data("no documents to predict".into()));
    }

    let mut lines = String::new();
    for (id, lyrics) in &inputs {
        let pred = predict_one(&model, &vocab, id, lyrics)?;
        lines.push_str(&serde_json::to_string(&pred)?);
        lines.push('\n');
    }

    match &args.out {
        Some(path) => {
            std::fs::write(path, &lines)?;
            let mut manifest = RunManifest::new("predict", serde_json::json!({}), None);
            manifest.add_input(&args.model);
            if let Some(input) = &args.input {
                manifest.add_input(input);
            }
            manifest.add_artifact(path)?;
            manifest.write(&sibling_manifest_path(path))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(lines.as_bytes())?;
        }
    }
    Ok(())
}
