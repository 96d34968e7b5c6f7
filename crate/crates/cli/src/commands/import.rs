use std::io::Cursor;
use std::path::PathBuf;

use lyrnet_core::corpus::{self, VocabPolicy};

use crate::errors::CliError;
use crate::manifest::{sibling_manifest_path, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ImportFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct ImportArgs {
    /// Source file (JSONL records or CSV with a header row).
    #[arg(long)]
    pub input: PathBuf,
    /// Normalized corpus JSONL destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<ImportFormat>,
}

fn infer_format(args: &ImportArgs) -> Result<ImportFormat, CliError> {
    if let Some(f) = args.format {
        return Ok(f);
    }
    match args.input.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => Ok(ImportFormat::Jsonl),
        Some("csv") => Ok(ImportFormat::Csv),
        _ => Err(CliError::Usage(format!(
            "cannot infer format of {}; pass --format",
            args.input.display()
        ))),
    }
}

/// CSV rows become the same JSON records the JSONL path parses, so both
/// formats share validation (label consistency, duplicate ids).
fn csv_to_jsonl(path: &PathBuf) -> Result<String, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .clone();
    let known = ["id", "artist", "title", "lyrics", "quadrant", "valence", "arousal"];
    for h in headers.iter() {
        if !known.contains(&h) {
            return Err(CliError::Data(format!("unknown csv column '{h}'")));
        }
    }
    let mut out = String::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("csv row {}: {e}", i + 2)))?;
        let mut obj = serde_json::Map::new();
        for (h, v) in headers.iter().zip(record.iter()) {
            if v.is_empty() {
                continue;
            }
            obj.insert(h.to_string(), serde_json::Value::String(v.to_string()));
        }
        out.push_str(&serde_json::Value::Object(obj).to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn run(args: &ImportArgs) -> Result<(), CliError> {
    let format = infer_format(args)?;
    let text = match format {
        ImportFormat::Jsonl => std::fs::read_to_string(&args.input)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.input.display())))?,
        ImportFormat::Csv => csv_to_jsonl(&args.input)?,
    };
    let (corpus, _vocab) = corpus::read_corpus(Cursor::new(text), VocabPolicy::Build, None)?;
    if corpus.is_empty() {
        return Err(CliError::Data(format!(
            "{} contains no documents",
            args.input.display()
        )));
    }
    corpus::save_corpus(&args.out, &corpus)?;

    let mut manifest = RunManifest::new(
        "import",
        serde_json::json!({ "format": format!("{format:?}").to_lowercase() }),
        None,
    );
    manifest.add_input(&args.input);
    manifest.add_artifact(&args.out)?;
    manifest.write(&sibling_manifest_path(&args.out))?;
    eprintln!(
        "imported {} documents into {}",
        corpus.len(),
        args.out.display()
    );
    Ok(())
}
