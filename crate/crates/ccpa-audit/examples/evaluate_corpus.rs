//! Full evaluation loop: generate the bundled corpus, serve it, run the
//! checker against every site, and print accuracy metrics — first for the
//! curated sites, then for the two failure-mode probes.
//!
//! Run with: cargo run --example evaluate_corpus

use std::path::PathBuf;

use ccpa_audit::corpus::{
    bundled_fixture_spec, evaluate, generate_fixtures_from_spec, EvalMetrics, EvalOptions,
    BUNDLED_PROBES_TRUTH, BUNDLED_TRUTH,
};
use ccpa_audit::fixture_server;
use ccpa_audit::model::{default_config, CrawlConfig};

fn print_metrics(metrics: &EvalMetrics) {
    println!(
        "  {:<22} {:>4} {:>4} {:>4} {:>4} {:>9}",
        "criterion", "tp", "fp", "fn", "tn", "accuracy"
    );
    for (id, counts) in &metrics.per_criterion {
        println!(
            "  {:<22} {:>4} {:>4} {:>4} {:>4} {:>8.1}%",
            id.as_str(),
            counts.tp,
            counts.fp,
            counts.fn_,
            counts.tn,
            counts.accuracy() * 100.0
        );
    }
    println!("  overall accuracy: {:.4}", metrics.accuracy);
    for m in &metrics.mismatches {
        println!(
            "  mismatch: {} {} expected {} got {}",
            m.site_id, m.criterion, m.expected, m.actual
        );
    }
}

#[tokio::main]
async fn main() {
    let work = tempfile::tempdir().expect("tempdir");
    generate_fixtures_from_spec(&bundled_fixture_spec(), work.path()).expect("generate corpus");
    let truth_path = work.path().join("truth.json");
    std::fs::write(&truth_path, BUNDLED_TRUTH).unwrap();
    let probes_path = work.path().join("probes-truth.json");
    std::fs::write(&probes_path, BUNDLED_PROBES_TRUTH).unwrap();

    let server = fixture_server::serve(
        work.path().to_path_buf(),
        "127.0.0.1:0".parse().unwrap(),
        vec![],
    )
    .await
    .expect("fixture server");

    let cfg = CrawlConfig {
        politeness_delay_ms: 5,
        ..default_config().crawl
    };
    let registry = default_config().criteria;

    let run = |truth: PathBuf| {
        let base = server.base_url();
        let cfg = cfg.clone();
        let registry = registry.clone();
        let corpus_dir = work.path().to_path_buf();
        async move {
            evaluate(EvalOptions {
                corpus_dir: &corpus_dir,
                truth_path: &truth,
                fixture_base: &base,
                cfg: &cfg,
                registry: &registry,
                archive: None,
                parallel: 1,
            })
            .await
            .expect("evaluation")
        }
    };

    println!("curated corpus:");
    let curated = run(truth_path).await;
    print_metrics(&curated.metrics);

    println!();
    println!("failure-mode probes (deliberate FP/FN reproduction):");
    let probes = run(probes_path).await;
    print_metrics(&probes.metrics);
    println!();
    println!(
        "probes recorded {} false positives and {} false negatives",
        probes.metrics.false_positives(),
        probes.metrics.false_negatives()
    );

    server.shutdown().await;
}
