#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use ccpa_audit::corpus::{bundled_fixture_spec, generate_fixtures_from_spec};
use ccpa_audit::fixture_server::{self, FixtureServer};
use ccpa_audit::model::CrawlConfig;
use ccpa_audit::service::ServiceState;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

/// Crawl configuration tuned for fast local fixture runs.
pub fn fast_cfg() -> CrawlConfig {
    CrawlConfig {
        politeness_delay_ms: 5,
        per_fetch_timeout_ms: 5_000,
        total_deadline_ms: 30_000,
        ..CrawlConfig::default()
    }
}

pub struct CorpusHarness {
    pub dir: tempfile::TempDir,
    pub server: FixtureServer,
}

impl CorpusHarness {
    pub fn base_url(&self) -> String {
        self.server.base_url()
    }

    pub fn corpus_dir(&self) -> &Path {
        self.dir.path()
    }
}

/// Generate the bundled corpus into a temp dir and serve it.
pub async fn corpus_harness() -> CorpusHarness {
    let dir = tempfile::tempdir().expect("tempdir");
    generate_fixtures_from_spec(&bundled_fixture_spec(), dir.path()).expect("generate corpus");
    let server = fixture_server::serve(
        dir.path().to_path_buf(),
        "127.0.0.1:0".parse().unwrap(),
        vec![],
    )
    .await
    .expect("fixture server");
    CorpusHarness { dir, server }
}

/// Bind the service on an ephemeral port; returns its address and a shutdown
/// sender.
pub async fn spawn_service(state: Arc<ServiceState>) -> (SocketAddr, oneshot::Sender<()>) {
    let listener = TcpListener::bind("127.0.0.1:0")
        .await
        .expect("bind service");
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = oneshot::channel::<()>();
    tokio::spawn(async move {
        let _ = ccpa_audit::service::serve_with_shutdown(state, listener, async {
            let _ = rx.await;
        })
        .await;
    });
    (addr, tx)
}

/// Replace run metadata (check id, timestamps) with fixed tokens so two
/// otherwise-identical serialized check responses can be compared byte for
/// byte.
pub fn mask_check_response(raw: &str) -> String {
    let value: serde_json::Value = serde_json::from_str(raw).expect("valid check response json");
    let report = &value["report"];
    let mut masked = raw.to_string();
    if let Some(id) = report["check_id"].as_str() {
        masked = masked.replace(id, "CHECK_ID");
    }
    if let Some(t) = report["started_at"].as_str() {
        masked = masked.replace(t, "T_START");
    }
    if let Some(t) = report["finished_at"].as_str() {
        masked = masked.replace(t, "T_FINISH");
    }
    masked
}

/// Independent RFC 3986 syntax-normalization oracle for http(s) URLs.
///
/// Implements the normalization steps the fetcher promises — scheme default,
/// lowercase scheme and host, default-port stripping, dot-segment removal,
/// fragment removal, "/" for an empty path — directly from the RFC's
/// remove_dot_segments algorithm, without the url crate.
pub mod rfc3986 {
    pub fn normalize(input: &str) -> Option<String> {
        let trimmed = input.trim();
        if trimmed.is_empty() {
            return None;
        }
        let with_scheme = if trimmed.contains("://") {
            trimmed.to_string()
        } else if trimmed.starts_with("//") {
            format!("https:{trimmed}")
        } else {
            format!("https://{trimmed}")
        };
        let (scheme, rest) = with_scheme.split_once("://")?;
        let scheme = scheme.to_ascii_lowercase();
        if scheme != "http" && scheme != "https" {
            return None;
        }
        let (authority, tail) = match rest.find(['/', '?', '#']) {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, ""),
        };
        // The fuzz generator avoids userinfo and IPv6 literals.
        if authority.is_empty() || authority.contains('@') || authority.contains('[') {
            return None;
        }
        let (host, port) = match authority.rsplit_once(':') {
            Some((h, p)) if !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()) => {
                (h, Some(p.parse::<u16>().ok()?))
            }
            Some(_) => return None,
            None => (authority, None),
        };
        let host = host.to_ascii_lowercase();
        if host.is_empty() {
            return None;
        }
        let default_port = if scheme == "http" { 80 } else { 443 };

        let without_fragment = match tail.find('#') {
            Some(i) => &tail[..i],
            None => tail,
        };
        let (path, query) = match without_fragment.find('?') {
            Some(i) => (&without_fragment[..i], Some(&without_fragment[i + 1..])),
            None => (without_fragment, None),
        };
        let path = if path.is_empty() {
            "/".to_string()
        } else {
            let removed = remove_dot_segments(path);
            if removed.is_empty() {
                "/".to_string()
            } else {
                removed
            }
        };

        let mut out = format!("{scheme}://{host}");
        if let Some(p) = port {
            if p != default_port {
                out.push(':');
                out.push_str(&p.to_string());
            }
        }
        out.push_str(&path);
        if let Some(q) = query {
            out.push('?');
            out.push_str(q);
        }
        Some(out)
    }

    /// RFC 3986 section 5.2.4.
    pub fn remove_dot_segments(path: &str) -> String {
        let mut input = path.to_string();
        let mut output = String::new();
        while !input.is_empty() {
            if let Some(rest) = input.strip_prefix("../") {
                input = rest.to_string();
            } else if let Some(rest) = input.strip_prefix("./") {
                input = rest.to_string();
            } else if let Some(rest) = input.strip_prefix("/./") {
                input = format!("/{rest}");
            } else if input == "/." {
                input = "/".to_string();
            } else if let Some(rest) = input.strip_prefix("/../") {
                input = format!("/{rest}");
                pop_segment(&mut output);
            } else if input == "/.." {
                input = "/".to_string();
                pop_segment(&mut output);
            } else if input == "." || input == ".." {
                input.clear();
            } else {
                let start = usize::from(input.starts_with('/'));
                let end = input[start..]
                    .find('/')
                    .map(|i| i + start)
                    .unwrap_or(input.len());
                output.push_str(&input[..end]);
                input = input[end..].to_string();
            }
        }
        output
    }

    fn pop_segment(output: &mut String) {
        match output.rfind('/') {
            Some(i) => output.truncate(i),
            None => output.clear(),
        }
    }
}

/// Reference DOM-text oracle: a tag-stripping state machine independent of
/// the html5ever parsing path. Tags become word boundaries; comments and the
/// contents of head/script/style are dropped; the named entities used by the
/// comparison fixture are decoded; output is lowercased with collapsed
/// whitespace.
pub mod reference_text {
    const CONTAINER_SKIP: [&str; 5] = ["script", "style", "head", "title", "textarea"];

    pub fn extract(html: &str) -> String {
        let mut out = String::new();
        let mut rest = html;
        while let Some(lt) = rest.find('<') {
            push_text(&mut out, &rest[..lt]);
            rest = &rest[lt..];
            if let Some(after) = rest.strip_prefix("<!--") {
                rest = match after.find("-->") {
                    Some(i) => &after[i + 3..],
                    None => "",
                };
                out.push(' ');
                continue;
            }
            let Some(gt) = rest.find('>') else {
                break;
            };
            let tag_body = &rest[1..gt];
            let name: String = tag_body
                .trim_start_matches('/')
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_ascii_lowercase();
            let is_closing = tag_body.starts_with('/');
            rest = &rest[gt + 1..];
            out.push(' ');
            if !is_closing && CONTAINER_SKIP.contains(&name.as_str()) {
                let closer = format!("</{name}");
                let lower = rest.to_ascii_lowercase();
                rest = match lower.find(&closer) {
                    Some(i) => {
                        let after = &rest[i..];
                        match after.find('>') {
                            Some(j) => &after[j + 1..],
                            None => "",
                        }
                    }
                    None => "",
                };
            }
        }
        push_text(&mut out, rest);
        out.to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn push_text(out: &mut String, text: &str) {
        let decoded = text
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&#39;", "'")
            .replace("&nbsp;", " ");
        out.push_str(&decoded);
    }
}
