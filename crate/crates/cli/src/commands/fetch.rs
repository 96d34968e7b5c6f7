use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

use lyrnet_core::fetch::{
    crawl_batch, FixtureSite, HttpTransport, SongQuery, Transport,
};
use serde::Deserialize;

use crate::config::{self, FileConfig};
use crate::errors::CliError;
use crate::manifest::{sibling_manifest_path, RunManifest};

#[derive(Debug, clap::Args)]
pub struct FetchArgs {
    /// JSONL of `{"artist", "title", "fallback_url"?}` queries.
    #[arg(long)]
    pub queries: PathBuf,
    /// Crawl records JSONL destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Serve this JSONL catalog of `{"artist", "title", "lyrics"}` from an
    /// in-process site instead of going over the network.
    #[arg(long)]
    pub fixture_catalog: Option<PathBuf>,
    /// Cache directory; LYRNET_CACHE_DIR and the config file are consulted
    /// when omitted.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Minimum milliseconds between requests to one host.
    #[arg(long)]
    pub interval_ms: Option<u64>,
    /// Also report the coverage direct fallback URLs alone would reach.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Debug, Deserialize)]
struct CatalogRecord {
    artist: String,
    title: String,
    lyrics: String,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<Vec<T>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::Data(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

pub fn run(args: &FetchArgs, file: &FileConfig) -> Result<(), CliError> {
    let queries: Vec<SongQuery> = read_jsonl(&args.queries)?;
    let mut fetch_config = config::resolve_fetch(
        file,
        args.cache_dir.as_deref(),
        args.max_in_flight,
        args.interval_ms,
    );
    fetch_config.compute_baseline = args.baseline;

    let fixture = match &args.fixture_catalog {
        Some(path) => {
            let catalog: Vec<CatalogRecord> = read_jsonl(path)?;
            let mut site = FixtureSite::new();
            for song in &catalog {
                site.add_song(&song.artist, &song.title, &song.lyrics);
            }
            // the in-process site answers instantly; stay polite but quick
            fetch_config.site = lyrnet_core::fetch::SiteProfile::fixture();
            Some(site)
        }
        None => None,
    };
    let http;
    let transport: &dyn Transport = match &fixture {
        Some(site) => site,
        None => {
            http = HttpTransport::new(Duration::from_secs(10));
            &http
        }
    };

    let outcome = crawl_batch(&queries, transport, &fetch_config)?;
    let mut f = std::fs::File::create(&args.out)?;
    for record in &outcome.records {
        writeln!(f, "{}", serde_json::to_string(record)?)?;
    }
    drop(f);

    match outcome.baseline_coverage {
        Some(base) => eprintln!(
            "fetched {}/{} songs (coverage {:.1}%, direct-url baseline {:.1}%)",
            outcome
                .records
                .iter()
                .filter(|r| r.lyrics.is_some())
                .count(),
            outcome.records.len(),
            outcome.coverage * 100.0,
            base * 100.0
        ),
        None => eprintln!(
            "fetched {}/{} songs (coverage {:.1}%)",
            outcome
                .records
                .iter()
                .filter(|r| r.lyrics.is_some())
                .count(),
            outcome.records.len(),
            outcome.coverage * 100.0
        ),
    }

    let mut manifest = RunManifest::new(
        "fetch",
        serde_json::json!({
            "search_url": fetch_config.site.search_url,
            "lyrics_selector": fetch_config.site.lyrics_selector,
            "max_in_flight": fetch_config.max_in_flight,
            "min_request_interval_ms": fetch_config.min_request_interval.as_millis() as u64,
            "coverage": outcome.coverage,
            "baseline_coverage": outcome.baseline_coverage,
        }),
        None,
    );
    manifest.add_input(&args.queries);
    if let Some(path) = &args.fixture_catalog {
        manifest.add_input(path);
    }
    manifest.add_artifact(&args.out)?;
    manifest.write(&sibling_manifest_path(&args.out))?;
    Ok(())
}
