use std::path::PathBuf;

use lyrnet_core::corpus::{self, VocabPolicy};

use crate::errors::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct SplitArgs {
    /// Labeled corpus JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated ratios summing to 1 (for example 0.8,0.2).
    #[arg(long, default_value = "0.8,0.2")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Splits land at <prefix>-0.jsonl, <prefix>-1.jsonl, ...
    #[arg(long)]
    pub out_prefix: PathBuf,
}

fn parse_ratios(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad ratio '{p}'")))
        })
        .collect()
}

pub fn run(args: &SplitArgs) -> Result<(), CliError> {
    let ratios = parse_ratios(&args.ratios)?;
    let (corpus, _) = corpus::load_corpus(&args.input, VocabPolicy::Build, None)?;
    let splits = corpus::split(&corpus, &ratios, args.seed).map_err(|e| match e {
        corpus::CorpusError::BadRatios(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;

    let mut manifest = RunManifest::new(
        "split",
        serde_json::json!({ "ratios": ratios }),
        Some(args.seed),
    );
    manifest.add_input(&args.input);
    let prefix = args.out_prefix.display().to_string();
    for (i, part) in splits.iter().enumerate() {
        let path = PathBuf::from(format!("{prefix}-{i}.jsonl"));
        corpus::save_corpus(&path, part)?;
        manifest.add_artifact(&path)?;
        eprintln!("split {i}: {} documents -> {}", part.len(), path.display());
    }
    manifest.write(&PathBuf::from(format!("{prefix}.manifest.json")))?;
    Ok(())
}
