//! Budgeted, polite HTTP(S) retrieval: URL normalization, redirect and size
//! caps, per-host politeness, and robots.txt handling.

use std::collections::HashMap;
use std::fmt;
use std::time::Duration;

use chrono::Utc;
use reqwest::redirect;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::Mutex;
use tokio::time::Instant;

use crate::model::{registrable_domain, CrawlConfig, PageSnapshot};

/// Product token sent as the User-Agent and matched against robots.txt.
pub const USER_AGENT: &str = concat!(
    "ccpa-audit-engine/",
    env!("CARGO_PKG_VERSION"),
    " (+https://docs.rs/ccpa-audit)"
);

const MAX_REDIRECTS: usize = 5;
const ROBOTS_BYTE_CAP: usize = 256 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchErrorKind {
    InvalidUrl,
    DnsFailure,
    ConnectFailure,
    Timeout,
    HttpStatus(u16),
    TooLarge,
    NonHtml,
}

impl FetchErrorKind {
    /// Stable token used in report errors and service payloads.
    pub fn token(self) -> &'static str {
        match self {
            FetchErrorKind::InvalidUrl => "INVALID_URL",
            FetchErrorKind::DnsFailure => "DNS_FAILURE",
            FetchErrorKind::ConnectFailure => "CONNECT_FAILURE",
            FetchErrorKind::Timeout => "TIMEOUT",
            FetchErrorKind::HttpStatus(_) => "HTTP_STATUS",
            FetchErrorKind::TooLarge => "TOO_LARGE",
            FetchErrorKind::NonHtml => "NON_HTML",
        }
    }
}

impl fmt::Display for FetchErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FetchErrorKind::HttpStatus(code) => write!(f, "HTTP_STATUS({code})"),
            other => f.write_str(other.token()),
        }
    }
}

#[derive(Debug, Clone, Error)]
#[error("{kind}: {detail} ({url})")]
pub struct FetchError {
    pub kind: FetchErrorKind,
    pub detail: String,
    pub url: String,
}

impl FetchError {
    pub fn new(kind: FetchErrorKind, detail: impl Into<String>, url: impl Into<String>) -> Self {
        FetchError {
            kind,
            detail: detail.into(),
            url: url.into(),
        }
    }
}

/// Exactly one of snapshot or error.
pub type FetchOutcome = Result<PageSnapshot, FetchError>;

/// Normalize a user-supplied URL string.
///
/// The scheme defaults to https when absent, the host is lowercased, default
/// ports are stripped, dot-segments are resolved, and the fragment is
/// removed. The result re-normalizes to itself.
pub fn normalize_url(input: &str) -> Result<String, FetchError> {
    let trimmed = input.trim();
    if trimmed.is_empty() {
        return Err(FetchError::new(
            FetchErrorKind::InvalidUrl,
            "empty input",
            input,
        ));
    }
    let candidate = if trimmed.contains("://") {
        trimmed.to_string()
    } else if let Some(rest) = trimmed.strip_prefix("//") {
        format!("https://{rest}")
    } else {
        format!("https://{trimmed}")
    };
    let mut url = url::Url::parse(&candidate)
        .map_err(|e| FetchError::new(FetchErrorKind::InvalidUrl, e.to_string(), trimmed))?;
    match url.scheme() {
        "http" | "https" => {}
        other => {
            return Err(FetchError::new(
                FetchErrorKind::InvalidUrl,
                format!("unsupported scheme '{other}'"),
                trimmed,
            ));
        }
    }
    if url.host_str().is_none_or(str::is_empty) {
        return Err(FetchError::new(
            FetchErrorKind::InvalidUrl,
            "missing host",
            trimmed,
        ));
    }
    url.set_fragment(None);
    Ok(url.into())
}

/// Hex SHA-256 of the body bytes.
pub fn snapshot_id(body: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(body);
    format!("{:x}", hasher.finalize())
}

fn accepted_content_type(media_type: &str) -> bool {
    matches!(
        media_type,
        "text/html" | "application/xhtml+xml" | "text/plain"
    )
}

/// Shared retrieval state: one HTTP client, the per-host politeness limiter,
/// and a per-host robots.txt cache. Safe for concurrent use.
pub struct Fetcher {
    client: reqwest::Client,
    next_slot: Mutex<HashMap<String, Instant>>,
    robots: Mutex<HashMap<String, Vec<String>>>,
}

impl Fetcher {
    pub fn new(cfg: &CrawlConfig) -> Result<Self, FetchError> {
        let same_site_only = cfg.same_site_only;
        let policy = redirect::Policy::custom(move |attempt| {
            if attempt.previous().len() > MAX_REDIRECTS {
                return attempt.stop();
            }
            if same_site_only {
                let origin = attempt
                    .previous()
                    .first()
                    .and_then(|u| u.host_str())
                    .map(registrable_domain);
                let target = attempt.url().host_str().map(registrable_domain);
                if origin.is_some() && origin != target {
                    return attempt.stop();
                }
            }
            attempt.follow()
        });
        let client = reqwest::Client::builder()
            .user_agent(USER_AGENT)
            .redirect(policy)
            .build()
            .map_err(|e| FetchError::new(FetchErrorKind::ConnectFailure, e.to_string(), ""))?;
        Ok(Fetcher {
            client,
            next_slot: Mutex::new(HashMap::new()),
            robots: Mutex::new(HashMap::new()),
        })
    }

    /// Sleep until the host's next polite slot, then claim the one after.
    pub async fn wait_politely(&self, host: &str, delay: Duration) {
        loop {
            let now = Instant::now();
            let wake = {
                let mut slots = self.next_slot.lock().await;
                match slots.get(host) {
                    Some(&slot) if slot > now => slot,
                    _ => {
                        slots.insert(host.to_string(), now + delay);
                        return;
                    }
                }
            };
            tokio::time::sleep_until(wake).await;
        }
    }

    /// Politeness-gated fetch; the usual entry point for crawling.
    pub async fn polite_fetch(&self, url: &str, cfg: &CrawlConfig) -> FetchOutcome {
        self.polite_fetch_with_timeout(url, cfg, Duration::from_millis(cfg.per_fetch_timeout_ms))
            .await
    }

    pub async fn polite_fetch_with_timeout(
        &self,
        url: &str,
        cfg: &CrawlConfig,
        timeout: Duration,
    ) -> FetchOutcome {
        let host = host_key(url)?;
        self.wait_politely(&host, Duration::from_millis(cfg.politeness_delay_ms))
            .await;
        self.fetch_page_with_timeout(url, cfg, timeout).await
    }

    /// Raw fetch. The caller is responsible for per-host politeness.
    pub async fn fetch_page(&self, url: &str, cfg: &CrawlConfig) -> FetchOutcome {
        self.fetch_page_with_timeout(url, cfg, Duration::from_millis(cfg.per_fetch_timeout_ms))
            .await
    }

    pub async fn fetch_page_with_timeout(
        &self,
        url: &str,
        cfg: &CrawlConfig,
        timeout: Duration,
    ) -> FetchOutcome {
        let response = self
            .client
            .get(url)
            .timeout(timeout)
            .send()
            .await
            .map_err(|e| classify_reqwest_error(&e, url))?;

        let final_url = normalize_url(response.url().as_str())?;
        let status = response.status();
        if !status.is_success() {
            return Err(FetchError::new(
                FetchErrorKind::HttpStatus(status.as_u16()),
                format!("status {status}"),
                final_url,
            ));
        }

        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("text/html")
            .to_string();
        let media_type = content_type
            .split(';')
            .next()
            .unwrap_or("")
            .trim()
            .to_ascii_lowercase();
        if !accepted_content_type(&media_type) {
            return Err(FetchError::new(
                FetchErrorKind::NonHtml,
                format!("content-type {media_type}"),
                final_url,
            ));
        }

        let mut body: Vec<u8> = Vec::new();
        let mut response = response;
        loop {
            match response.chunk().await {
                Ok(Some(chunk)) => {
                    if body.len() + chunk.len() > cfg.max_body_bytes {
                        return Err(FetchError::new(
                            FetchErrorKind::TooLarge,
                            format!("body exceeds {} bytes", cfg.max_body_bytes),
                            final_url,
                        ));
                    }
                    body.extend_from_slice(&chunk);
                }
                Ok(None) => break,
                Err(e) => return Err(classify_reqwest_error(&e, &final_url)),
            }
        }

        Ok(PageSnapshot {
            snapshot_id: snapshot_id(&body),
            requested_url: url.to_string(),
            final_url,
            http_status: status.as_u16(),
            fetched_at: Utc::now(),
            content_type: media_type,
            body,
            text: String::new(),
            links: Vec::new(),
            phone_numbers: Vec::new(),
            depth: 0,
        })
    }

    /// Whether robots.txt permits fetching `url`. Fetched once per authority;
    /// unreachable or non-2xx robots files allow everything.
    pub async fn robots_allowed(&self, url: &str, cfg: &CrawlConfig) -> bool {
        let Ok(parsed) = url::Url::parse(url) else {
            return false;
        };
        let Ok(host) = host_key(url) else {
            return false;
        };
        let origin = format!("{}://{host}", parsed.scheme());
        let disallow = {
            let cached = self.robots.lock().await.get(&origin).cloned();
            match cached {
                Some(rules) => rules,
                None => {
                    let rules = self.fetch_robots(&origin, &host, cfg).await;
                    self.robots
                        .lock()
                        .await
                        .entry(origin)
                        .or_insert_with(|| rules.clone());
                    rules
                }
            }
        };
        let path = parsed.path();
        !disallow
            .iter()
            .any(|prefix| !prefix.is_empty() && path.starts_with(prefix.as_str()))
    }

    async fn fetch_robots(&self, origin: &str, host: &str, cfg: &CrawlConfig) -> Vec<String> {
        self.wait_politely(host, Duration::from_millis(cfg.politeness_delay_ms))
            .await;
        let url = format!("{origin}/robots.txt");
        let response = match self
            .client
            .get(&url)
            .timeout(Duration::from_millis(cfg.per_fetch_timeout_ms))
            .send()
            .await
        {
            Ok(r) if r.status().is_success() => r,
            _ => return Vec::new(),
        };
        let mut body = Vec::new();
        let mut response = response;
        while let Ok(Some(chunk)) = response.chunk().await {
            body.extend_from_slice(&chunk);
            if body.len() > ROBOTS_BYTE_CAP {
                break;
            }
        }
        parse_robots(&String::from_utf8_lossy(&body), "ccpa-audit-engine")
    }
}

/// Politeness map key: host plus explicit port.
fn host_key(url: &str) -> Result<String, FetchError> {
    let parsed = url::Url::parse(url)
        .map_err(|e| FetchError::new(FetchErrorKind::InvalidUrl, e.to_string(), url))?;
    let host = parsed
        .host_str()
        .ok_or_else(|| FetchError::new(FetchErrorKind::InvalidUrl, "missing host", url))?;
    Ok(match parsed.port() {
        Some(port) => format!("{host}:{port}"),
        None => host.to_string(),
    })
}

fn classify_reqwest_error(err: &reqwest::Error, url: &str) -> FetchError {
    let detail = err.to_string();
    let chain = {
        let mut parts = vec![detail.clone()];
        let mut source = std::error::Error::source(err);
        while let Some(s) = source {
            parts.push(s.to_string());
            source = s.source();
        }
        parts.join(": ").to_ascii_lowercase()
    };
    let kind = if err.is_timeout() {
        FetchErrorKind::Timeout
    } else if chain.contains("dns") || chain.contains("failed to lookup") {
        FetchErrorKind::DnsFailure
    } else if err.is_connect() {
        FetchErrorKind::ConnectFailure
    } else if err.is_builder() || err.is_request() {
        FetchErrorKind::InvalidUrl
    } else {
        FetchErrorKind::ConnectFailure
    };
    FetchError::new(kind, detail, url)
}

/// Merge the Disallow prefixes that apply to `agent_token`. Groups naming the
/// agent win over `*` groups; only prefix rules are honored.
fn parse_robots(text: &str, agent_token: &str) -> Vec<String> {
    let mut groups: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    let mut agents: Vec<String> = Vec::new();
    let mut rules: Vec<String> = Vec::new();
    let mut in_rules = false;

    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "user-agent" => {
                if in_rules {
                    groups.push((std::mem::take(&mut agents), std::mem::take(&mut rules)));
                    in_rules = false;
                }
                agents.push(value.to_ascii_lowercase());
            }
            "disallow" => {
                in_rules = true;
                if !value.is_empty() {
                    rules.push(value.trim_end_matches('*').to_string());
                }
            }
            "allow" => in_rules = true,
            _ => {}
        }
    }
    if !agents.is_empty() || !rules.is_empty() {
        groups.push((agents, rules));
    }

    let token = agent_token.to_ascii_lowercase();
    let named: Vec<&(Vec<String>, Vec<String>)> = groups
        .iter()
        .filter(|(names, _)| {
            names
                .iter()
                .any(|n| n != "*" && (token.starts_with(n.as_str()) || n.starts_with(&token)))
        })
        .collect();
    let selected: Vec<&(Vec<String>, Vec<String>)> = if named.is_empty() {
        groups
            .iter()
            .filter(|(names, _)| names.iter().any(|n| n == "*"))
            .collect()
    } else {
        named
    };
    selected
        .into_iter()
        .flat_map(|(_, rules)| rules.iter().cloned())
        .collect()
}
