//! Start the HTTP API programmatically and leave it running until Ctrl-C.
//!
//! Run with: cargo run --example serve_api -- 127.0.0.1:8080
//!
//! Then: curl -s -X POST http://127.0.0.1:8080/api/v1/check \
//!         -H 'content-type: application/json' -d '{"url":"example.com"}'

use std::sync::Arc;

use ccpa_audit::archive::Archive;
use ccpa_audit::model::default_config;
use ccpa_audit::service::{serve_with_shutdown, ServiceState};

#[tokio::main]
async fn main() {
    let bind = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:8080".to_string());
    let config = default_config();
    let state = Arc::new(ServiceState {
        registry: config.criteria,
        profiles: config.site_profiles,
        crawl_cfg: config.crawl,
        archive: Archive::new("ccpa-archive"),
        allowed_origins: Default::default(),
    });
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .unwrap_or_else(|e| {
            eprintln!("cannot bind {bind}: {e}");
            std::process::exit(2);
        });
    println!("listening on http://{}", listener.local_addr().unwrap());
    println!(
        "endpoints: POST /api/v1/check, GET /api/v1/checks/{{id}}/snapshots/{{id}}, GET /healthz"
    );

    serve_with_shutdown(state, listener, async {
        let _ = tokio::signal::ctrl_c().await;
        println!("shutting down");
    })
    .await
    .expect("server error");
}
