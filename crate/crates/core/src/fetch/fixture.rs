//! In-process fake lyrics site for tests and offline runs: a page store, a
//! search endpoint, scripted failures, and a request log for politeness
//! assertions.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::transport::{Transport, TransportError, TransportResponse};
use super::slugify;

pub const FIXTURE_BASE: &str = "https://fixture.test";

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SearchEntry {
    pub url: String,
    pub title: String,
}

#[derive(Default)]
pub struct FixtureSite {
    pages: HashMap<String, String>,
    entries: Vec<SearchEntry>,
    /// url -> number of times it should still fail before succeeding
    failures: Mutex<HashMap<String, u32>>,
    log: Mutex<Vec<(Instant, String)>>,
    calls: AtomicU64,
}

impl FixtureSite {
    pub fn new() -> FixtureSite {
        FixtureSite::default()
    }

    pub fn search_url_template() -> String {
        format!("{FIXTURE_BASE}/search?q={{query}}")
    }

    pub fn lyrics_url(artist: &str, title: &str) -> String {
        format!(
            "{FIXTURE_BASE}/lyrics/{}-{}",
            slugify(artist),
            slugify(title)
        )
    }

    /// Register a song: a lyrics page wrapped in the standard container plus
    /// a search catalog entry. Returns the page URL.
    pub fn add_song(&mut self, artist: &str, title: &str, lyrics: &str) -> String {
        let url = FixtureSite::lyrics_url(artist, title);
        let html = format!(
            "<html><body><h1>{artist} - {title}</h1>\
             <div class=\"lyrics\">{}</div>\
             <div class=\"ads\">buy things</div></body></html>",
            lyrics.replace('\n', "<br/>")
        );
        self.pages.insert(url.clone(), html);
        self.entries.push(SearchEntry {
            url: url.clone(),
            title: format!("{artist} - {title}"),
        });
        url
    }

    /// Register a raw page with no search entry.
    pub fn add_page(&mut self, url: &str, body: &str) {
        self.pages.insert(url.to_string(), body.to_string());
    }

    /// Make the next `count` requests for `url` fail with a connection error.
    pub fn fail_next(&self, url: &str, count: u32) {
        self.failures.lock().unwrap().insert(url.to_string(), count);
    }

    pub fn request_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// (timestamp, url) pairs in arrival order.
    pub fn request_log(&self) -> Vec<(Instant, String)> {
        self.log.lock().unwrap().clone()
    }
}

impl Transport for FixtureSite {
    fn get(&self, url: &str) -> Result<TransportResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log
            .lock()
            .unwrap()
            .push((Instant::now(), url.to_string()));

        {
            let mut failures = self.failures.lock().unwrap();
            if let Some(left) = failures.get_mut(url) {
                if *left > 0 {
                    *left -= 1;
                    return Err(TransportError::Connection("scripted failure".into()));
                }
            }
        }

        let search_prefix = format!("{FIXTURE_BASE}/search?q=");
        if url.starts_with(&search_prefix) {
            // Real search engines rank; the fixture returns the whole catalog
            // and leaves scoring to the resolver under test.
            let body = serde_json::to_string(&self.entries).unwrap();
            return Ok(TransportResponse { status: 200, body });
        }

        match self.pages.get(url) {
            Some(body) => Ok(TransportResponse {
                status: 200,
                body: body.clone(),
            }),
            None => Err(TransportError::Status(404)),
        }
    }
}
