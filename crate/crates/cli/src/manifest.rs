//! Every artifact-producing run leaves a JSON manifest beside its outputs:
//! what ran, with which settings and seed, over which inputs, and the
//! checksums of everything it wrote.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::CliError;

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub artifacts: Vec<ArtifactEntry>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: Option<u64>) -> RunManifest {
        RunManifest {
            subcommand: subcommand.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started_unix: now_unix(),
            finished_unix: 0,
        }
    }

    pub fn add_input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Record a written artifact with its checksum.
    pub fn add_artifact(&mut self, path: &Path) -> Result<(), CliError> {
        self.artifacts.push(ArtifactEntry {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> Result<(), CliError> {
        self.finished_unix = now_unix();
        let json = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// Manifest path for a single-file artifact: `<file>.manifest.json` next to it.
pub fn sibling_manifest_path(artifact: &Path) -> std::path::PathBuf {
    let mut name = artifact
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".manifest.json");
    artifact.with_file_name(name)
}
