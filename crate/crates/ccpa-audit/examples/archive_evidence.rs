//! Archive a check, reload it, and verify every evidence span against the
//! stored snapshot text — the same audit trail the service exposes through
//! its snapshot endpoint.
//!
//! Run with: cargo run --example archive_evidence

use ccpa_audit::archive::Archive;
use ccpa_audit::corpus::{bundled_fixture_spec, generate_fixtures_from_spec};
use ccpa_audit::engine::run_check;
use ccpa_audit::fixture_server;
use ccpa_audit::model::{default_config, CrawlConfig, CriterionStatus};

#[tokio::main]
async fn main() {
    let work = tempfile::tempdir().expect("tempdir");
    generate_fixtures_from_spec(&bundled_fixture_spec(), work.path()).expect("generate corpus");
    let server = fixture_server::serve(
        work.path().to_path_buf(),
        "127.0.0.1:0".parse().unwrap(),
        vec![],
    )
    .await
    .expect("fixture server");

    let config = default_config();
    let cfg = CrawlConfig {
        politeness_delay_ms: 5,
        ..config.crawl
    };
    let seed = format!("{}/full-compliance/index.html", server.base_url());
    let run = run_check(&seed, &cfg, &config.criteria, &[], None).await;

    let archive_dir = work.path().join("archive");
    let archive = Archive::new(&archive_dir);
    let check_id = archive
        .store(&run.report, &run.snapshots)
        .expect("store report");
    println!("archived check {check_id} under {}", archive_dir.display());

    let reloaded = archive.load(&check_id).expect("reload report");
    assert_eq!(reloaded, run.report);
    println!(
        "report round-tripped; {} snapshots referenced",
        reloaded.snapshot_ids.len()
    );

    println!();
    for result in reloaded.results.values() {
        if result.status != CriterionStatus::Found {
            continue;
        }
        println!("{} evidence:", result.id);
        for span in &result.evidence {
            let snapshot = archive
                .load_snapshot(&span.snapshot_id)
                .expect("snapshot resolves");
            let holds = snapshot
                .text
                .get(span.offset..span.offset + span.matched_phrase.len())
                == Some(span.matched_phrase.as_str());
            println!(
                "  {:?} at offset {} on {} (substring check: {})",
                span.matched_phrase,
                span.offset,
                span.page_url,
                if holds { "ok" } else { "VIOLATION" }
            );
            println!("    …{}…", span.excerpt);
        }
    }

    server.shutdown().await;
}
