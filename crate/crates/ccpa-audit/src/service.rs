//! HTTP API: the check endpoint, snapshot retrieval, health, CORS, and the
//! error mapping.
//!
//! Every check request runs a fresh crawl; no response is ever served from a
//! cache. Paths are versioned: POST /api/v1/check and
//! GET /api/v1/checks/{check_id}/snapshots/{snapshot_id}, plus GET /healthz.

use std::collections::HashSet;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::archive::{Archive, ArchiveError};
use crate::engine::{run_check, DEADLINE_EXCEEDED};
use crate::model::{CcpaResult, CheckResponse, CrawlConfig, Registry, SiteProfile};

pub struct ServiceState {
    pub registry: Registry,
    pub profiles: Vec<SiteProfile>,
    pub crawl_cfg: CrawlConfig,
    pub archive: Archive,
    pub allowed_origins: HashSet<String>,
}

#[derive(Debug, Deserialize)]
pub struct CheckRequest {
    pub url: String,
    #[serde(default)]
    pub profile_hint: Option<String>,
}

/// Error payload shape shared by every non-200 response.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

fn error_response(
    status: StatusCode,
    error: &str,
    kind: Option<String>,
    detail: Option<String>,
) -> Response {
    (
        status,
        Json(ErrorBody {
            error: error.to_string(),
            kind,
            detail,
        }),
    )
        .into_response()
}

/// Outcome of matching a request Origin against the allowlist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorsDecision {
    /// No Origin header (CLI, curl): pass through untouched.
    NoOrigin,
    /// Origin is allowlisted; echo it back.
    Allow(String),
    /// Origin not allowlisted: no CORS headers at all.
    Deny,
}

pub fn cors_filter(origin: Option<&str>, allowlist: &HashSet<String>) -> CorsDecision {
    match origin {
        None => CorsDecision::NoOrigin,
        Some(o) if allowlist.contains(o) => CorsDecision::Allow(o.to_string()),
        Some(_) => CorsDecision::Deny,
    }
}

async fn cors_middleware(
    State(state): State<Arc<ServiceState>>,
    request: Request,
    next: Next,
) -> Response {
    let origin = request
        .headers()
        .get(header::ORIGIN)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let decision = cors_filter(origin.as_deref(), &state.allowed_origins);

    if request.method() == Method::OPTIONS {
        let mut response = StatusCode::NO_CONTENT.into_response();
        if let CorsDecision::Allow(origin) = &decision {
            let headers = response.headers_mut();
            if let Ok(value) = HeaderValue::from_str(origin) {
                headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, value);
            }
            headers.insert(
                header::ACCESS_CONTROL_ALLOW_METHODS,
                HeaderValue::from_static("GET, POST"),
            );
            headers.insert(
                header::ACCESS_CONTROL_ALLOW_HEADERS,
                HeaderValue::from_static("content-type"),
            );
            headers.insert(header::VARY, HeaderValue::from_static("Origin"));
        }
        return response;
    }

    let mut response = next.run(request).await;
    if let CorsDecision::Allow(origin) = decision {
        if let Ok(value) = HeaderValue::from_str(&origin) {
            response
                .headers_mut()
                .insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, value);
            response
                .headers_mut()
                .insert(header::VARY, HeaderValue::from_static("Origin"));
        }
    }
    response
}

async fn log_requests(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let response = next.run(request).await;
    eprintln!("{method} {path} -> {}", response.status().as_u16());
    response
}

async fn handle_check(
    State(state): State<Arc<ServiceState>>,
    payload: Result<Json<CheckRequest>, JsonRejection>,
) -> Response {
    let Json(request) = match payload {
        Ok(p) => p,
        Err(rejection) => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "bad_input",
                None,
                Some(rejection.body_text()),
            );
        }
    };

    let run = run_check(
        &request.url,
        &state.crawl_cfg,
        &state.registry,
        &state.profiles,
        request.profile_hint.as_deref(),
    )
    .await;

    if let Some(err) = &run.report.error {
        return match err.kind.as_str() {
            "INVALID_URL" => error_response(
                StatusCode::BAD_REQUEST,
                "bad_input",
                None,
                Some(err.detail.clone()),
            ),
            DEADLINE_EXCEEDED => {
                error_response(StatusCode::GATEWAY_TIMEOUT, "deadline_exceeded", None, None)
            }
            kind => error_response(
                StatusCode::BAD_GATEWAY,
                "fetch_failed",
                Some(kind.to_string()),
                Some(err.detail.clone()),
            ),
        };
    }

    if let Err(e) = state.archive.store(&run.report, &run.snapshots) {
        return error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            None,
            Some(e.to_string()),
        );
    }

    let ccpa_result = CcpaResult::from_report(&run.report);
    Json(CheckResponse {
        report: run.report,
        ccpa_result,
    })
    .into_response()
}

async fn handle_snapshot(
    State(state): State<Arc<ServiceState>>,
    Path((check_id, snapshot_id)): Path<(String, String)>,
) -> Response {
    let report = match state.archive.load(&check_id) {
        Ok(r) => r,
        Err(ArchiveError::NotFound(_)) => {
            return error_response(
                StatusCode::NOT_FOUND,
                "not_found",
                None,
                Some(format!("unknown check {check_id}")),
            );
        }
        Err(e) => {
            return error_response(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                None,
                Some(e.to_string()),
            );
        }
    };
    if !report.snapshot_ids.iter().any(|id| id == &snapshot_id) {
        return error_response(
            StatusCode::NOT_FOUND,
            "not_found",
            None,
            Some(format!("check {check_id} has no snapshot {snapshot_id}")),
        );
    }
    match state.archive.load_snapshot(&snapshot_id) {
        Ok(snapshot) => {
            let mut response = Response::new(Body::from(snapshot.body));
            let headers = response.headers_mut();
            if let Ok(value) = HeaderValue::from_str(&snapshot.content_type) {
                headers.insert(header::CONTENT_TYPE, value);
            }
            if let Ok(value) = HeaderValue::from_str(&snapshot.fetched_at.to_rfc3339()) {
                headers.insert("x-fetched-at", value);
            }
            response
        }
        Err(ArchiveError::NotFound(_)) => error_response(
            StatusCode::NOT_FOUND,
            "not_found",
            None,
            Some(format!("unknown snapshot {snapshot_id}")),
        ),
        Err(e) => error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            None,
            Some(e.to_string()),
        ),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/v1/check", post(handle_check))
        .route(
            "/api/v1/checks/{check_id}/snapshots/{snapshot_id}",
            get(handle_snapshot),
        )
        .route("/healthz", get(healthz))
        .layer(middleware::from_fn_with_state(
            Arc::clone(&state),
            cors_middleware,
        ))
        .layer(middleware::from_fn(log_requests))
        .with_state(state)
}

/// Serve until `shutdown` resolves, then drain in-flight requests.
pub async fn serve_with_shutdown(
    state: Arc<ServiceState>,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn allowlist(origins: &[&str]) -> HashSet<String> {
        origins.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cors_decisions() {
        let list = allowlist(&["https://app.example.com"]);
        assert_eq!(cors_filter(None, &list), CorsDecision::NoOrigin);
        assert_eq!(
            cors_filter(Some("https://app.example.com"), &list),
            CorsDecision::Allow("https://app.example.com".into())
        );
        assert_eq!(
            cors_filter(Some("https://evil.example"), &list),
            CorsDecision::Deny
        );
        assert_eq!(
            cors_filter(Some("anything"), &HashSet::new()),
            CorsDecision::Deny
        );
    }
}
