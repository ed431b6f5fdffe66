//! One-shot compliance check of a live URL with the default registry.
//!
//! Run with: cargo run --example check_site -- example.com
//!
//! Prints the verdict, the six core criterion results, and any
//! recommendations, then exits. The URL may be given with or without a
//! scheme prefix.

use ccpa_audit::engine::run_check;
use ccpa_audit::model::{default_config, CriterionId, CriterionStatus};

#[tokio::main]
async fn main() {
    let Some(url) = std::env::args().nth(1) else {
        eprintln!("usage: check_site <url>");
        std::process::exit(2);
    };

    let config = default_config();
    println!("checking {url} ...");
    let run = run_check(
        &url,
        &config.crawl,
        &config.criteria,
        &config.site_profiles,
        None,
    )
    .await;
    let report = &run.report;

    if let Some(err) = &report.error {
        eprintln!("check failed: {} ({})", err.kind, err.detail);
        std::process::exit(2);
    }

    println!();
    println!("verdict: {:?}", report.verdict);
    println!(
        "pages fetched: {} in {} ms",
        report.pages_fetched,
        (report.finished_at - report.started_at).num_milliseconds()
    );
    println!();
    for id in CriterionId::CORE {
        let status = report.results.get(&id).map(|r| r.status);
        let mark = match status {
            Some(CriterionStatus::Found) => "found",
            Some(CriterionStatus::NotFound) => "not found",
            Some(CriterionStatus::Skipped) => "skipped (dependency missing)",
            None => "not in registry",
        };
        println!("  {:<22} {mark}", id.as_str());
    }
    if let Some(url) = &report.ccpa_page_url {
        println!();
        println!("ccpa page: {url}");
    }
    if !report.recommendations.is_empty() {
        println!();
        println!("recommendations:");
        for rec in &report.recommendations {
            println!("  [{:?}] {}", rec.severity, rec.message);
        }
    }
}
