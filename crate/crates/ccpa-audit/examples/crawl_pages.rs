//! Crawl a site without evaluating criteria: shows the bounded BFS order,
//! per-page depth, and the ranked privacy-page candidates.
//!
//! Run with: cargo run --example crawl_pages -- example.com

use std::sync::Arc;
use std::time::Duration;

use ccpa_audit::crawl::crawl_site;
use ccpa_audit::fetch::{normalize_url, Fetcher};
use ccpa_audit::model::default_config;

#[tokio::main]
async fn main() {
    let Some(url) = std::env::args().nth(1) else {
        eprintln!("usage: crawl_pages <url>");
        std::process::exit(2);
    };
    let cfg = default_config().crawl;
    let seed = match normalize_url(&url) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("bad url: {e}");
            std::process::exit(2);
        }
    };
    let fetcher = Arc::new(Fetcher::new(&cfg).expect("build fetcher"));
    let deadline = tokio::time::Instant::now() + Duration::from_millis(cfg.total_deadline_ms);

    println!(
        "crawling {seed} (max {} pages, depth {})",
        cfg.max_pages, cfg.max_depth
    );
    let result = match crawl_site(fetcher, &seed, &cfg, None, deadline).await {
        Ok(r) => r,
        Err(e) => {
            eprintln!("homepage fetch failed: {e}");
            std::process::exit(2);
        }
    };

    println!();
    println!("fetched {} pages:", result.snapshots.len());
    for snapshot in &result.snapshots {
        println!(
            "  depth {}  {}  ({} links, {} bytes)",
            snapshot.depth,
            snapshot.final_url,
            snapshot.links.len(),
            snapshot.body.len()
        );
    }
    println!();
    if result.privacy_candidates.is_empty() {
        println!("no privacy-page candidates found");
    } else {
        println!("privacy-page candidates (descending score):");
        for (idx, score) in &result.privacy_candidates {
            println!("  {:>3}  {}", score, result.snapshots[*idx].final_url);
        }
    }
    if result.budget_exhausted {
        println!();
        println!("budget exhausted: some known pages were not fetched");
    }
    for error in &result.errors {
        println!("fetch error: {error}");
    }
}
