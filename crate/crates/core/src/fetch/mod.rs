//! Robust lyrics crawling: search-based URL resolution tolerant of
//! misspellings, selector-based extraction, retries with backoff, per-host
//! politeness, an on-disk cache, and a bounded-concurrency batch driver.

pub mod fixture;
mod transport;

pub use fixture::{FixtureSite, SearchEntry};
pub use transport::{host_of, HttpTransport, Transport, TransportError, TransportResponse};

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("no queries to crawl")]
    NoQueries,
    #[error("query {index} has neither artist/title nor a fallback url")]
    InvalidQuery { index: usize },
    #[error("bad site profile: {0}")]
    BadProfile(String),
    #[error("cache i/o failed: {0}")]
    Cache(#[from] std::io::Error),
}

// ── domain types ────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SongQuery {
    #[serde(default)]
    pub artist: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_url: Option<String>,
}

impl SongQuery {
    pub fn new(artist: &str, title: &str) -> SongQuery {
        SongQuery {
            artist: artist.to_string(),
            title: title.to_string(),
            fallback_url: None,
        }
    }

    pub fn with_fallback(mut self, url: &str) -> SongQuery {
        self.fallback_url = Some(url.to_string());
        self
    }

    fn has_name(&self) -> bool {
        !(normalize_tokens(&self.artist).is_empty() && normalize_tokens(&self.title).is_empty())
    }

    pub fn is_valid(&self) -> bool {
        self.has_name() || self.fallback_url.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrawlStatus {
    Resolved,
    Fetched,
    ParseFailed,
    NotFound,
    TransportError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlRecord {
    pub query: SongQuery,
    pub resolved_url: Option<String>,
    pub status: CrawlStatus,
    pub lyrics: Option<String>,
    pub attempts: u32,
    pub resolution_score: f64,
}

/// Which site the crawler talks to: where to search and where the lyrics
/// live on a page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteProfile {
    /// GET endpoint with a `{query}` placeholder; must return a JSON list of
    /// `{url, title}` candidates.
    pub search_url: String,
    /// `tag.class` or `#id` of the lyrics container.
    pub lyrics_selector: String,
}

impl SiteProfile {
    pub fn fixture() -> SiteProfile {
        SiteProfile {
            search_url: FixtureSite::search_url_template(),
            lyrics_selector: "div.lyrics".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            base_delay: Duration::from_millis(500),
            factor: 2.0,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub site: SiteProfile,
    pub max_in_flight: usize,
    pub min_request_interval: Duration,
    pub retry: RetryPolicy,
    pub cache_dir: Option<PathBuf>,
    /// Also measure coverage from fallback URLs alone, for comparison.
    pub compute_baseline: bool,
}

impl FetchConfig {
    pub fn fixture_defaults() -> FetchConfig {
        FetchConfig {
            site: SiteProfile::fixture(),
            max_in_flight: 4,
            min_request_interval: Duration::from_millis(500),
            retry: RetryPolicy::default(),
            cache_dir: None,
            compute_baseline: false,
        }
    }
}

// ── text utilities ──────────────────────────────────────────────────

/// Lowercased alphanumeric words.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn slugify(text: &str) -> String {
    normalize_tokens(text).join("-")
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit-distance-tolerant token similarity in [0, 1]; below 0.5 counts as no
/// match at all so unrelated words cannot accumulate partial credit.
fn token_similarity(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 0.0;
    }
    let sim = 1.0 - levenshtein(a, b) as f64 / max_len as f64;
    if sim >= 0.5 {
        sim
    } else {
        0.0
    }
}

/// Mean over query tokens of the best slug-token similarity.
pub fn score_candidate(query_tokens: &[String], candidate_url: &str) -> f64 {
    if query_tokens.is_empty() {
        return 0.0;
    }
    let slug = candidate_url
        .trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or("");
    let slug_tokens = normalize_tokens(&slug.replace('-', " "));
    if slug_tokens.is_empty() {
        return 0.0;
    }
    let total: f64 = query_tokens
        .iter()
        .map(|q| {
            slug_tokens
                .iter()
                .map(|s| token_similarity(q, s))
                .fold(0.0, f64::max)
        })
        .sum();
    total / query_tokens.len() as f64
}

pub const RESOLUTION_THRESHOLD: f64 = 0.5;

// ── retry / politeness ──────────────────────────────────────────────

/// Enforces a minimum interval between requests to the same host. A slot is
/// reserved under the lock, then waited out after releasing it, so
/// concurrent callers line up instead of racing.
pub struct RateLimiter {
    interval: Duration,
    slots: Mutex<HashMap<String, Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> RateLimiter {
        RateLimiter {
            interval,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn acquire(&self, host: &str) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut slots = self.slots.lock().unwrap();
            let now = Instant::now();
            let slot = match slots.get(host) {
                Some(&next) if next > now => next,
                _ => now,
            };
            slots.insert(host.to_string(), slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

/// GET with exponential backoff on transient failures. Returns the final
/// outcome and how many attempts were made.
pub fn get_with_retry(
    transport: &dyn Transport,
    url: &str,
    retry: &RetryPolicy,
    limiter: &RateLimiter,
) -> (Result<TransportResponse, TransportError>, u32) {
    let mut delay = retry.base_delay;
    let attempts = retry.max_attempts.max(1);
    for attempt in 1..=attempts {
        limiter.acquire(host_of(url));
        match transport.get(url) {
            Ok(resp) => return (Ok(resp), attempt),
            Err(e) if e.is_transient() && attempt < attempts => {
                std::thread::sleep(delay);
                delay = delay.mul_f64(retry.factor);
            }
            Err(e) => return (Err(e), attempt),
        }
    }
    unreachable!("retry loop always returns");
}

// ── resolution ──────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Resolution {
    pub url: Option<String>,
    pub score: f64,
    pub attempts: u32,
    pub error: Option<TransportError>,
}

/// Search for `artist title lyrics`, score candidates against the query,
/// take the best above threshold, else the fallback URL, else nothing.
pub fn resolve(
    query: &SongQuery,
    transport: &dyn Transport,
    profile: &SiteProfile,
    retry: &RetryPolicy,
    limiter: &RateLimiter,
) -> Resolution {
    let fallback = |attempts: u32| Resolution {
        url: query.fallback_url.clone(),
        score: 0.0,
        attempts,
        error: None,
    };
    if !query.has_name() {
        return fallback(0);
    }

    let mut tokens = normalize_tokens(&query.artist);
    tokens.extend(normalize_tokens(&query.title));
    let text = format!("{} {} lyrics", query.artist, query.title);
    let search = profile
        .search_url
        .replace("{query}", &slugify(&text).replace('-', "%20"));

    let (response, attempts) = get_with_retry(transport, &search, retry, limiter);
    let body = match response {
        Ok(r) => r.body,
        Err(e) => {
            return Resolution {
                url: None,
                score: 0.0,
                attempts,
                error: Some(e),
            }
        }
    };
    let candidates: Vec<SearchEntry> = match serde_json::from_str(&body) {
        Ok(c) => c,
        Err(_) => return fallback(attempts),
    };
    let best = candidates
        .iter()
        .map(|c| (score_candidate(&tokens, &c.url), &c.url))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    match best {
        Some((score, url)) if score >= RESOLUTION_THRESHOLD => Resolution {
            url: Some(url.clone()),
            score,
            attempts,
            error: None,
        },
        _ => fallback(attempts),
    }
}

// ── extraction ──────────────────────────────────────────────────────

/// Pull the text of the container matching `tag.class` or `#id`, strip
/// markup, and normalize whitespace. Empty result counts as no match.
pub fn extract_lyrics(html: &str, selector: &str) -> Option<String> {
    let inner = select_inner(html, selector)?;
    let text = strip_markup(&inner);
    if text.is_empty() {
        None
    } else {
        Some(text)
    }
}

fn select_inner(html: &str, selector: &str) -> Option<String> {
    let (want_tag, want_class, want_id) = if let Some(id) = selector.strip_prefix('#') {
        (None, None, Some(id))
    } else if let Some((tag, class)) = selector.split_once('.') {
        (Some(tag), Some(class), None)
    } else {
        (Some(selector), None, None)
    };

    let bytes = html.as_bytes();
    let mut i = 0;
    while let Some(open) = html[i..].find('<') {
        let start = i + open;
        let end = html[start..].find('>')? + start;
        let tag_body = &html[start + 1..end];
        i = end + 1;
        if tag_body.starts_with('/') || tag_body.starts_with('!') {
            continue;
        }
        let name: String = tag_body
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect();
        if name.is_empty() {
            continue;
        }
        let tag_matches = want_tag.is_none_or(|t| t.eq_ignore_ascii_case(&name));
        let class_matches = want_class.is_none_or(|c| {
            attr_value(tag_body, "class")
                .map(|v| v.split_whitespace().any(|w| w == c))
                .unwrap_or(false)
        });
        let id_matches = want_id.is_none_or(|id| attr_value(tag_body, "id").as_deref() == Some(id));
        if !(tag_matches && class_matches && id_matches) {
            continue;
        }
        if tag_body.ends_with('/') {
            return Some(String::new());
        }
        // walk to the matching close tag, honoring nesting of the same tag
        let mut depth = 1usize;
        let mut j = i;
        while depth > 0 {
            let next = html[j..].find('<')? + j;
            let close = html[next..].find('>')? + next;
            let body = &html[next + 1..close];
            if let Some(rest) = body.strip_prefix('/') {
                if rest.trim().eq_ignore_ascii_case(&name) {
                    depth -= 1;
                    if depth == 0 {
                        return Some(html[i..next].to_string());
                    }
                }
            } else {
                let n: String = body
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric())
                    .collect();
                if n.eq_ignore_ascii_case(&name) && !body.ends_with('/') {
                    depth += 1;
                }
            }
            j = close + 1;
        }
        let _ = bytes;
    }
    None
}

fn attr_value(tag_body: &str, attr: &str) -> Option<String> {
    let lower = tag_body.to_lowercase();
    let pos = lower.find(&format!("{attr}=\""))? + attr.len() + 2;
    let rest = &tag_body[pos..];
    let end = rest.find('"')?;
    Some(rest[..end].to_string())
}

fn strip_markup(inner: &str) -> String {
    let mut text = String::with_capacity(inner.len());
    let mut rest = inner;
    while let Some(open) = rest.find('<') {
        text.push_str(&rest[..open]);
        let Some(close) = rest[open..].find('>') else {
            rest = "";
            break;
        };
        let tag = rest[open + 1..open + close].to_lowercase();
        if tag.starts_with("br") || tag.starts_with("/p") || tag.starts_with("/div") {
            text.push('\n');
        }
        rest = &rest[open + close + 1..];
    }
    text.push_str(rest);
    let text = text
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'");
    text.lines()
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

// ── cache ───────────────────────────────────────────────────────────

pub fn cache_key(query: &SongQuery) -> String {
    let normalized = format!(
        "{}\u{1f}{}\u{1f}{}",
        slugify(&query.artist),
        slugify(&query.title),
        query.fallback_url.as_deref().unwrap_or("")
    );
    let digest = Sha256::digest(normalized.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn cache_path(dir: &Path, query: &SongQuery) -> PathBuf {
    dir.join(format!("{}.json", cache_key(query)))
}

pub fn load_cached(dir: &Path, query: &SongQuery) -> Option<CrawlRecord> {
    let bytes = std::fs::read(cache_path(dir, query)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

pub fn store_cached(dir: &Path, record: &CrawlRecord) -> Result<(), FetchError> {
    std::fs::create_dir_all(dir)?;
    let bytes = serde_json::to_vec(record).map_err(std::io::Error::other)?;
    std::fs::write(cache_path(dir, &record.query), bytes)?;
    Ok(())
}

// ── batch crawling ──────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub records: Vec<CrawlRecord>,
    /// fetched / total
    pub coverage: f64,
    /// Coverage achievable from fallback URLs alone, when requested.
    pub baseline_coverage: Option<f64>,
}

fn crawl_one(
    query: &SongQuery,
    transport: &dyn Transport,
    config: &FetchConfig,
    limiter: &RateLimiter,
) -> CrawlRecord {
    let resolution = resolve(query, transport, &config.site, &config.retry, limiter);
    let base = |status, attempts, url: Option<String>, score| CrawlRecord {
        query: query.clone(),
        resolved_url: url,
        status,
        lyrics: None,
        attempts,
        resolution_score: score,
    };
    if let Some(e) = resolution.error {
        let _ = e;
        return base(CrawlStatus::TransportError, resolution.attempts, None, 0.0);
    }
    let Some(url) = resolution.url else {
        return base(CrawlStatus::NotFound, resolution.attempts, None, 0.0);
    };

    let (response, attempts) = get_with_retry(transport, &url, &config.retry, limiter);
    match response {
        Err(_) => base(
            CrawlStatus::TransportError,
            attempts,
            Some(url),
            resolution.score,
        ),
        Ok(page) => match extract_lyrics(&page.body, &config.site.lyrics_selector) {
            None => base(CrawlStatus::ParseFailed, attempts, Some(url), resolution.score),
            Some(lyrics) => CrawlRecord {
                query: query.clone(),
                resolved_url: Some(url),
                status: CrawlStatus::Fetched,
                lyrics: Some(lyrics),
                attempts,
                resolution_score: resolution.score,
            },
        },
    }
}

/// Direct fallback-URL fetch only, no search step. Mirrors trusting the
/// per-dataset URLs as-is.
fn baseline_one(
    query: &SongQuery,
    transport: &dyn Transport,
    config: &FetchConfig,
    limiter: &RateLimiter,
) -> bool {
    let Some(url) = &query.fallback_url else {
        return false;
    };
    let (response, _) = get_with_retry(transport, url, &config.retry, limiter);
    match response {
        Ok(page) => extract_lyrics(&page.body, &config.site.lyrics_selector).is_some(),
        Err(_) => false,
    }
}

pub fn crawl_batch(
    queries: &[SongQuery],
    transport: &dyn Transport,
    config: &FetchConfig,
) -> Result<BatchOutcome, FetchError> {
    if queries.is_empty() {
        return Err(FetchError::NoQueries);
    }
    if let Some(index) = queries.iter().position(|q| !q.is_valid()) {
        return Err(FetchError::InvalidQuery { index });
    }
    if !config.site.search_url.contains("{query}") {
        return Err(FetchError::BadProfile(
            "search_url needs a {query} placeholder".into(),
        ));
    }

    let limiter = RateLimiter::new(config.min_request_interval);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<CrawlRecord>>> =
        (0..queries.len()).map(|_| Mutex::new(None)).collect();
    let baseline_hits = AtomicUsize::new(0);
    let cache_error: Mutex<Option<FetchError>> = Mutex::new(None);

    let workers = config.max_in_flight.max(1).min(queries.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= queries.len() {
                    break;
                }
                let query = &queries[i];
                let cached = config
                    .cache_dir
                    .as_deref()
                    .and_then(|dir| load_cached(dir, query));
                let record = match cached {
                    Some(record) => record,
                    None => {
                        let record = crawl_one(query, transport, config, &limiter);
                        if let Some(dir) = config.cache_dir.as_deref() {
                            if let Err(e) = store_cached(dir, &record) {
                                cache_error.lock().unwrap().get_or_insert(e);
                            }
                        }
                        record
                    }
                };
                if config.compute_baseline && baseline_one(query, transport, config, &limiter) {
                    baseline_hits.fetch_add(1, Ordering::SeqCst);
                }
                *slots[i].lock().unwrap() = Some(record);
            });
        }
    });
    if let Some(e) = cache_error.into_inner().unwrap() {
        return Err(e);
    }

    let records: Vec<CrawlRecord> = slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect();
    let fetched = records
        .iter()
        .filter(|r| r.status == CrawlStatus::Fetched)
        .count();
    Ok(BatchOutcome {
        coverage: fetched as f64 / records.len() as f64,
        baseline_coverage: config
            .compute_baseline
            .then(|| baseline_hits.load(Ordering::SeqCst) as f64 / records.len() as f64),
        records,
    })
}
