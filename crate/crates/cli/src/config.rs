//! Optional TOML settings file. Flags always win over the file, the file
//! wins over built-in defaults.

use std::path::Path;
use std::time::Duration;

use lyrnet_core::encoder::EncoderConfig;
use lyrnet_core::fetch::{FetchConfig, RetryPolicy, SiteProfile};
use lyrnet_core::heads::{HeadConfig, SummaryMode};
use lyrnet_core::train::TrainingConfig;
use serde::{Deserialize, Serialize};

use crate::errors::CliError;

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelSection>,
    pub train: Option<TrainSection>,
    pub fetch: Option<FetchSection>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_layers: Option<usize>,
    pub n_heads: Option<usize>,
    pub d_model: Option<usize>,
    pub d_ff: Option<usize>,
    pub dropout: Option<f64>,
    pub max_seq_len: Option<usize>,
    pub memory_len: Option<usize>,
    pub summary: Option<String>,
    pub bottleneck_dim: Option<usize>,
    pub head_dropout: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub lambdas: Option<[f64; 3]>,
    pub weight_decay: Option<f64>,
    pub grad_clip: Option<f64>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchSection {
    pub search_url: Option<String>,
    pub lyrics_selector: Option<String>,
    pub max_in_flight: Option<usize>,
    pub min_request_interval_ms: Option<u64>,
    pub retry_base_delay_ms: Option<u64>,
    pub retry_max_attempts: Option<u32>,
    pub cache_dir: Option<String>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

pub fn parse_summary_mode(s: &str) -> Result<SummaryMode, CliError> {
    match s {
        "mean" => Ok(SummaryMode::Mean),
        "last-token" | "last_token" => Ok(SummaryMode::LastToken),
        other => Err(CliError::Usage(format!(
            "unknown summary mode '{other}' (expected mean or last-token)"
        ))),
    }
}

/// Comma-separated task weights: quadrant,valence,arousal.
pub fn parse_lambdas(s: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--lambdas wants three comma-separated weights, got '{s}'"
        )));
    }
    let mut vals = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .parse()
            .map_err(|_| CliError::Usage(format!("bad task weight '{p}' in --lambdas")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

/// Flag-level model overrides collected by clap.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long)]
    pub n_heads: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    /// Encoder dropout probability.
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    pub memory_len: Option<usize>,
    /// Sequence summary: mean or last-token.
    #[arg(long)]
    pub summary: Option<String>,
    #[arg(long)]
    pub bottleneck_dim: Option<usize>,
    /// Dropout before the head trunk.
    #[arg(long)]
    pub head_dropout: Option<f64>,
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Task weights as quadrant,valence,arousal (for example 1,0.5,0.5).
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Defaults, then file, then flags. `vocab_size` is always supplied by the
/// caller from the actual vocabulary.
pub fn resolve_model(
    file: &FileConfig,
    flags: &ModelFlags,
    vocab_size: usize,
) -> Result<(EncoderConfig, HeadConfig), CliError> {
    let m = file.model.clone().unwrap_or_default();
    let encoder = EncoderConfig {
        n_layers: flags.n_layers.or(m.n_layers).unwrap_or(2),
        n_heads: flags.n_heads.or(m.n_heads).unwrap_or(2),
        d_model: flags.d_model.or(m.d_model).unwrap_or(32),
        d_ff: flags.d_ff.or(m.d_ff).unwrap_or(64),
        dropout_p: flags.dropout.or(m.dropout).unwrap_or(0.1),
        max_seq_len: flags.max_seq_len.or(m.max_seq_len).unwrap_or(1024),
        memory_len: flags.memory_len.or(m.memory_len).unwrap_or(0),
        vocab_size,
    };
    let summary_mode = match flags.summary.as_deref().or(m.summary.as_deref()) {
        Some(s) => parse_summary_mode(s)?,
        None => SummaryMode::Mean,
    };
    let head = HeadConfig {
        summary_mode,
        bottleneck_dim: flags.bottleneck_dim.or(m.bottleneck_dim).unwrap_or(16),
        dropout_p: flags.head_dropout.or(m.head_dropout).unwrap_or(0.1),
    };
    Ok((encoder, head))
}

pub fn resolve_training(
    file: &FileConfig,
    flags: &TrainFlags,
) -> Result<TrainingConfig, CliError> {
    let t = file.train.clone().unwrap_or_default();
    let defaults = TrainingConfig::default();
    let lambdas = match &flags.lambdas {
        Some(s) => parse_lambdas(s)?,
        None => t
            .lambdas
            .map(|l| (l[0], l[1], l[2]))
            .unwrap_or(defaults.lambdas),
    };
    Ok(TrainingConfig {
        learning_rate: flags
            .learning_rate
            .or(t.learning_rate)
            .unwrap_or(defaults.learning_rate),
        batch_size: flags.batch_size.or(t.batch_size).unwrap_or(defaults.batch_size),
        lambdas,
        epochs: flags.epochs.or(t.epochs).unwrap_or(defaults.epochs),
        weight_decay: flags
            .weight_decay
            .or(t.weight_decay)
            .unwrap_or(defaults.weight_decay),
        adam_betas: defaults.adam_betas,
        adam_eps: defaults.adam_eps,
        seed: flags.seed.or(t.seed).unwrap_or(defaults.seed),
        grad_clip: flags.grad_clip.or(t.grad_clip).or(defaults.grad_clip),
        patience: flags.patience.or(t.patience).or(defaults.patience),
    })
}

/// Precedence for the cache directory: flag, then LYRNET_CACHE_DIR, then the
/// config file.
pub fn resolve_fetch(
    file: &FileConfig,
    cache_flag: Option<&Path>,
    max_in_flight: Option<usize>,
    interval_ms: Option<u64>,
) -> FetchConfig {
    let f = file.fetch.clone().unwrap_or_default();
    let cache_dir = cache_flag
        .map(|p| p.to_path_buf())
        .or_else(|| std::env::var_os("LYRNET_CACHE_DIR").map(Into::into))
        .or_else(|| f.cache_dir.as_deref().map(Into::into));
    let mut retry = RetryPolicy::default();
    if let Some(ms) = f.retry_base_delay_ms {
        retry.base_delay = Duration::from_millis(ms);
    }
    if let Some(n) = f.retry_max_attempts {
        retry.max_attempts = n;
    }
    FetchConfig {
        site: SiteProfile {
            search_url: f
                .search_url
                .unwrap_or_else(|| SiteProfile::fixture().search_url),
            lyrics_selector: f
                .lyrics_selector
                .unwrap_or_else(|| "div.lyrics".to_string()),
        },
        max_in_flight: max_in_flight.or(f.max_in_flight).unwrap_or(4),
        min_request_interval: Duration::from_millis(
            interval_ms.or(f.min_request_interval_ms).unwrap_or(500),
        ),
        retry,
        cache_dir,
        compute_baseline: false,
    }
}
