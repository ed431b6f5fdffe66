//! Materialize the bundled fixture corpus into a directory and serve it
//! locally — useful for poking at the checker with a browser or curl.
//!
//! Run with: cargo run --example generate_fixtures -- /tmp/ccpa-fixtures

use ccpa_audit::corpus::{bundled_fixture_spec, generate_fixtures_from_spec};
use ccpa_audit::fixture_server;

#[tokio::main]
async fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/fixture-corpus".to_string());
    let out_dir = std::path::PathBuf::from(&out);
    let manifest = generate_fixtures_from_spec(&bundled_fixture_spec(), &out_dir)
        .expect("generate fixture tree");
    println!("wrote {} sites under {out}", manifest.sites.len());

    let server = fixture_server::serve(out_dir, "127.0.0.1:0".parse().unwrap(), vec![])
        .await
        .expect("bind fixture server");
    println!("serving at {}", server.base_url());
    for site in &manifest.sites {
        println!("  {}/{}/{}", server.base_url(), site.id, site.seed);
    }
    println!("press Ctrl-C to stop");
    let _ = tokio::signal::ctrl_c().await;
    server.shutdown().await;
}
