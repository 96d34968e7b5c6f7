//! `lyrnet`: train, evaluate, and serve a multi-task lyrics emotion
//! classifier, plus corpus tooling and a polite lyrics crawler.
//!
//! Human-readable progress goes to stderr; machine artifacts go to files or
//! stdout. Exit codes: 0 success, 2 usage, 3 data problems, 4 training
//! divergence, 5 failed gradient check.

mod commands;
mod config;
mod errors;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use errors::CliError;

#[derive(Debug, Parser)]
#[command(name = "lyrnet", version, about = "Lyrics-based music emotion recognition")]
struct Cli {
    /// Optional TOML settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Produce a synthetic labeled corpus.
    Generate(commands::generate::GenerateArgs),
    /// Normalize an external CSV or JSONL dataset into corpus form.
    Import(commands::import::ImportArgs),
    /// Stratified corpus split with a seeded shuffle.
    Split(commands::split::SplitArgs),
    /// Crawl lyrics for a list of songs.
    Fetch(commands::fetch::FetchArgs),
    /// Train a model and write a checkpoint.
    Train(commands::train::TrainArgs),
    /// Score a checkpoint against a labeled split.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Classify raw lyrics with a checkpoint.
    Predict(commands::predict::PredictArgs),
    /// Compare multi-task training against single-task baselines.
    Ablate(commands::ablate::AblateArgs),
    /// Verify every backward rule against central differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = config::load_file_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(args) => commands::generate::run(args),
        Command::Import(args) => commands::import::run(args),
        Command::Split(args) => commands::split::run(args),
        Command::Fetch(args) => commands::fetch::run(args, &file),
        Command::Train(args) => commands::train::run(args, &file),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Ablate(args) => commands::ablate::run(args, &file),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
