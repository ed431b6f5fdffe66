//! Local static web server for fixture sites. Serves a directory as HTML
//! with optional per-path artificial delays for timeout tests.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::any;
use axum::Router;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Clone)]
struct ServerState {
    root: PathBuf,
    delays: Arc<HashMap<String, Duration>>,
}

/// A running fixture server; dropping it leaves the task running until
/// `shutdown` is called or the runtime stops.
pub struct FixtureServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl FixtureServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

/// Bind and serve `root`. `delays` maps request paths (leading slash
/// optional) to an artificial delay in milliseconds applied before
/// responding.
pub async fn serve(
    root: PathBuf,
    bind: SocketAddr,
    delays: Vec<(String, u64)>,
) -> std::io::Result<FixtureServer> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let delays = delays
        .into_iter()
        .map(|(path, ms)| {
            let path = if path.starts_with('/') {
                path
            } else {
                format!("/{path}")
            };
            (path, Duration::from_millis(ms))
        })
        .collect::<HashMap<_, _>>();
    let state = ServerState {
        root,
        delays: Arc::new(delays),
    };
    let app = Router::new().fallback(any(serve_path)).with_state(state);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
            .ok();
    });
    Ok(FixtureServer {
        addr,
        shutdown: Some(tx),
        task,
    })
}

async fn serve_path(State(state): State<ServerState>, uri: Uri) -> Response {
    let path = uri.path().to_string();
    if let Some(delay) = state.delays.get(&path) {
        tokio::time::sleep(*delay).await;
    }
    let rel = path.trim_start_matches('/');
    if rel.split('/').any(|segment| segment == "..") {
        return not_found();
    }
    let mut fs_path = state.root.join(rel);
    if rel.is_empty() || path.ends_with('/') {
        fs_path.push("index.html");
    }
    match tokio::fs::read(&fs_path).await {
        Ok(bytes) => {
            let content_type = content_type_for(&fs_path);
            ([(header::CONTENT_TYPE, content_type)], bytes).into_response()
        }
        Err(_) => not_found(),
    }
}

fn not_found() -> Response {
    (
        StatusCode::NOT_FOUND,
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        "not found",
    )
        .into_response()
}

fn content_type_for(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") | Some("htm") => "text/html; charset=utf-8",
        Some("json") => "application/json",
        Some("txt") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    async fn start(files: &[(&str, &str)]) -> (tempfile::TempDir, FixtureServer) {
        let dir = tempfile::tempdir().unwrap();
        for (name, content) in files {
            let path = dir.path().join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).unwrap();
            }
            std::fs::write(path, content).unwrap();
        }
        let server = serve(
            dir.path().to_path_buf(),
            "127.0.0.1:0".parse().unwrap(),
            vec![],
        )
        .await
        .unwrap();
        (dir, server)
    }

    #[tokio::test]
    async fn serves_existing_files_with_content_type() {
        let (_dir, server) = start(&[("page.html", "<p>hello</p>")]).await;
        let resp = reqwest::get(format!("{}/page.html", server.base_url()))
            .await
            .unwrap();
        assert_eq!(resp.status(), 200);
        assert!(resp
            .headers()
            .get("content-type")
            .unwrap()
            .to_str()
            .unwrap()
            .starts_with("text/html"));
        assert_eq!(resp.text().await.unwrap(), "<p>hello</p>");
        server.shutdown().await;
    }

    #[tokio::test]
    async fn missing_file_is_404() {
        let (_dir, server) = start(&[]).await;
        let resp = reqwest::get(format!("{}/nope.html", server.base_url()))
            .await
            .unwrap();
        assert_eq!(resp.status(), 404);
        server.shutdown().await;
    }

    #[tokio::test]
    async fn directory_requests_fall_back_to_index() {
        let (_dir, server) = start(&[("site/index.html", "<p>root</p>")]).await;
        let resp = reqwest::get(format!("{}/site/", server.base_url()))
            .await
            .unwrap();
        assert_eq!(resp.status(), 200);
        assert_eq!(resp.text().await.unwrap(), "<p>root</p>");
        server.shutdown().await;
    }

    #[tokio::test]
    async fn parent_traversal_is_rejected() {
        // reqwest resolves dot segments client-side, so speak raw HTTP.
        use tokio::io::{AsyncReadExt, AsyncWriteExt};
        let (_dir, server) = start(&[("a.html", "x")]).await;
        let mut stream = tokio::net::TcpStream::connect(server.addr()).await.unwrap();
        stream
            .write_all(
                b"GET /sub/../../a.html HTTP/1.1\r\nHost: fixture\r\nConnection: close\r\n\r\n",
            )
            .await
            .unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).await.unwrap();
        let status = response.lines().next().unwrap_or("");
        assert!(
            status.contains("404") || status.contains("400"),
            "got {status}"
        );
        server.shutdown().await;
    }

    #[tokio::test]
    async fn delayed_path_honors_configured_delay() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("slow.html"), "<p>slow</p>").unwrap();
        let server = serve(
            dir.path().to_path_buf(),
            "127.0.0.1:0".parse().unwrap(),
            vec![("/slow.html".to_string(), 200)],
        )
        .await
        .unwrap();
        let started = std::time::Instant::now();
        let resp = reqwest::get(format!("{}/slow.html", server.base_url()))
            .await
            .unwrap();
        let elapsed = started.elapsed();
        assert_eq!(resp.status(), 200);
        assert!(
            elapsed >= Duration::from_millis(150) && elapsed <= Duration::from_millis(1000),
            "delay out of range: {elapsed:?}"
        );
        server.shutdown().await;
    }
}
