use std::path::PathBuf;

use lyrnet_core::corpus;

use crate::errors::CliError;
use crate::manifest::{sibling_manifest_path, RunManifest};

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    /// Output corpus JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// Documents per quadrant (total is four times this).
    #[arg(long, default_value_t = 100)]
    pub per_quadrant: usize,
    /// Approximate filler vocabulary size.
    #[arg(long, default_value_t = 120)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    if args.per_quadrant == 0 {
        return Err(CliError::Usage("--per-quadrant must be >= 1".into()));
    }
    let corpus = corpus::generate_synthetic(args.per_quadrant, args.vocab_size, args.seed);
    corpus::save_corpus(&args.out, &corpus)?;

    let mut manifest = RunManifest::new(
        "generate",
        serde_json::json!({
            "per_quadrant": args.per_quadrant,
            "vocab_size": args.vocab_size,
        }),
        Some(args.seed),
    );
    manifest.add_artifact(&args.out)?;
    manifest.write(&sibling_manifest_path(&args.out))?;
    eprintln!(
        "generated {} labeled documents into {}",
        corpus.len(),
        args.out.display()
    );
    Ok(())
}
