use std::path::PathBuf;

use lyrnet_core::diagnostics::{run_gradcheck_suite, DEFAULT_TOLERANCE};
use serde::Serialize;

use crate::errors::CliError;
use crate::manifest::{sibling_manifest_path, RunManifest};

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    /// Maximum relative error against central differences.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Also run the deliberately broken backward rule; it must fail.
    #[arg(long)]
    pub include_corrupted_fixture: bool,
    /// JSON report destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EntryReport {
    name: String,
    max_rel_err: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct SuiteReport {
    tolerance: f64,
    entries: Vec<EntryReport>,
    all_passed: bool,
}

pub fn run(args: &GradcheckArgs) -> Result<(), CliError> {
    if !(args.tolerance > 0.0) {
        return Err(CliError::Usage("--tolerance must be > 0".into()));
    }
    let results = run_gradcheck_suite(args.tolerance, args.include_corrupted_fixture)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let mut failed: Vec<&str> = Vec::new();
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {:<28} max rel err {:.3e}", r.name, r.max_rel_err);
        if !r.passed {
            failed.push(r.name);
        }
    }

    let report = SuiteReport {
        tolerance: args.tolerance,
        entries: results
            .iter()
            .map(|r| EntryReport {
                name: r.name.to_string(),
                max_rel_err: r.max_rel_err,
                passed: r.passed,
            })
            .collect(),
        all_passed: failed.is_empty(),
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => {
            std::fs::write(path, &json)?;
            let mut manifest = RunManifest::new(
                "gradcheck",
                serde_json::json!({ "tolerance": args.tolerance }),
                None,
            );
            manifest.add_artifact(path)?;
            manifest.write(&sibling_manifest_path(path))?;
        }
        None => print!("{json}"),
    }

    if !failed.is_empty() {
        return Err(CliError::GradCheck(format!(
            "gradient check failed for: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
