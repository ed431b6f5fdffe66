use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use ccpa_audit::archive::Archive;
use ccpa_audit::corpus::{self, EvalMetrics, EvalOptions};
use ccpa_audit::engine::run_check;
use ccpa_audit::fixture_server;
use ccpa_audit::model::{
    load_config, CcpaResult, CheckResponse, CriterionId, CriterionStatus, Severity, Verdict,
};
use ccpa_audit::service::{serve_with_shutdown, ServiceState};

#[derive(Parser)]
#[command(
    name = "ccpa-audit",
    version,
    about = "Audit a website for CCPA compliance signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run one compliance check and print the report.
    ///
    /// Exit codes: 0 when compliance signals were found, 1 when no CCPA
    /// notice was found, 2 on error.
    Check {
        /// Website URL, with or without a scheme prefix.
        url: String,
        /// Configuration file; embedded defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_pages: Option<usize>,
        #[arg(long)]
        max_depth: Option<u32>,
        #[arg(long)]
        deadline_ms: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Archive directory for the report and page snapshots.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Host whose site profile should be applied.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Start the HTTP API service.
    Serve {
        #[arg(long, env = "CCPA_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated list of origins allowed by CORS.
        #[arg(long, env = "CCPA_ALLOWED_ORIGINS", value_delimiter = ',')]
        allowed_origins: Vec<String>,
        #[arg(long, default_value = "ccpa-archive")]
        archive: PathBuf,
    },
    /// Fixture-site utilities for testing and evaluation.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
    /// Evaluate the checker against a fixture corpus with ground truth.
    Eval {
        /// Directory containing the generated fixture tree and manifest.json.
        #[arg(long)]
        corpus: PathBuf,
        /// Ground-truth JSON file.
        #[arg(long)]
        truth: PathBuf,
        /// Address of the fixture server serving the corpus, e.g. 127.0.0.1:4100.
        #[arg(long)]
        fixture_addr: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Archive directory for the evaluation's reports and snapshots.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Serve a directory of static fixture sites.
    Serve {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:0")]
        bind: String,
        /// Artificial delay as path=milliseconds; repeatable.
        #[arg(long = "delay-ms")]
        delay_ms: Vec<String>,
    },
    /// Generate fixture sites from a declarative spec file.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check {
            url,
            config,
            max_pages,
            max_depth,
            deadline_ms,
            format,
            archive,
            profile,
        } => {
            cmd_check(
                url,
                config,
                max_pages,
                max_depth,
                deadline_ms,
                format,
                archive,
                profile,
            )
            .await
        }
        Command::Serve {
            bind,
            config,
            allowed_origins,
            archive,
        } => cmd_serve(bind, config, allowed_origins, archive).await,
        Command::Fixtures { command } => match command {
            FixturesCommand::Serve {
                dir,
                bind,
                delay_ms,
            } => cmd_fixtures_serve(dir, bind, delay_ms).await,
            FixturesCommand::Generate { spec, out } => cmd_fixtures_generate(spec, out),
        },
        Command::Eval {
            corpus,
            truth,
            fixture_addr,
            config,
            format,
            parallel,
            archive,
        } => {
            cmd_eval(
                corpus,
                truth,
                fixture_addr,
                config,
                format,
                parallel,
                archive,
            )
            .await
        }
    }
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

#[allow(clippy::too_many_arguments)]
async fn cmd_check(
    url: String,
    config: Option<PathBuf>,
    max_pages: Option<usize>,
    max_depth: Option<u32>,
    deadline_ms: Option<u64>,
    format: OutputFormat,
    archive: Option<PathBuf>,
    profile: Option<String>,
) -> ExitCode {
    let config = match load_config(config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mut cfg = config.crawl;
    if let Some(n) = max_pages {
        cfg.max_pages = n;
    }
    if let Some(n) = max_depth {
        cfg.max_depth = n;
    }
    if let Some(n) = deadline_ms {
        cfg.total_deadline_ms = n;
        cfg.per_fetch_timeout_ms = cfg.per_fetch_timeout_ms.min(n);
    }

    let run = run_check(
        &url,
        &cfg,
        &config.criteria,
        &config.site_profiles,
        profile.as_deref(),
    )
    .await;

    if let Some(dir) = archive {
        if let Err(e) = Archive::new(dir).store(&run.report, &run.snapshots) {
            return fail(e);
        }
    }

    let response = CheckResponse {
        ccpa_result: CcpaResult::from_report(&run.report),
        report: run.report,
    };
    match format {
        OutputFormat::Json => {
            // Identical bytes to the service's 200 response body.
            print!(
                "{}",
                serde_json::to_string(&response).expect("response serializes")
            );
        }
        OutputFormat::Text => render_report_text(&response),
    }

    match response.report.verdict {
        Verdict::CompliantSignalsFound => ExitCode::SUCCESS,
        Verdict::CcpaNotFound => ExitCode::from(1),
        Verdict::Error => {
            let err = response.report.error.as_ref();
            let detail = err
                .map(|e| format!("{}: {}", e.kind, e.detail))
                .unwrap_or_else(|| "check failed".into());
            fail(detail)
        }
    }
}

fn render_report_text(response: &CheckResponse) {
    let report = &response.report;
    println!("CCPA compliance check — {}", report.seed_url);
    println!(
        "verdict: {}",
        serde_json::to_value(report.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    );
    println!(
        "pages fetched: {} (budget exhausted: {})",
        report.pages_fetched, report.budget_exhausted
    );
    println!();
    println!("  {:<22} result", "criterion");
    for id in CriterionId::CORE {
        let mark = match report.results.get(&id).map(|r| r.status) {
            Some(CriterionStatus::Found) => "✓",
            Some(CriterionStatus::NotFound) => "✗",
            Some(CriterionStatus::Skipped) => "–",
            None => "?",
        };
        println!("  {:<22} {mark}", id.as_str());
    }
    println!("  (✓ found, ✗ not found, – skipped)");
    if let Some(url) = &report.ccpa_page_url {
        println!();
        println!("ccpa page: {url}");
    }
    if !report.recommendations.is_empty() {
        println!();
        println!("recommendations:");
        for rec in &report.recommendations {
            let tag = match rec.severity {
                Severity::Required => "REQUIRED",
                Severity::Advisory => "ADVISORY",
            };
            println!("  [{tag}] {}", rec.message);
        }
    }
    if let Some(instructions) = &report.complaint_instructions {
        println!();
        println!("{instructions}");
    }
}

async fn cmd_serve(
    bind: String,
    config: Option<PathBuf>,
    allowed_origins: Vec<String>,
    archive: PathBuf,
) -> ExitCode {
    let config = match load_config(config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let listener = match TcpListener::bind(&bind).await {
        Ok(l) => l,
        Err(e) => return fail(format!("cannot bind {bind}: {e}")),
    };
    let addr = listener
        .local_addr()
        .expect("bound listener has an address");
    let state = Arc::new(ServiceState {
        registry: config.criteria,
        profiles: config.site_profiles,
        crawl_cfg: config.crawl,
        archive: Archive::new(archive),
        allowed_origins: allowed_origins
            .into_iter()
            .filter(|o| !o.is_empty())
            .collect::<HashSet<String>>(),
    });
    eprintln!("listening on http://{addr}");

    let (tx, rx) = oneshot::channel::<()>();
    tokio::spawn(async move {
        wait_for_shutdown_signal().await;
        eprintln!("shutdown signal received; draining in-flight checks (up to 5s)");
        let _ = tx.send(());
        tokio::time::sleep(std::time::Duration::from_secs(5)).await;
        std::process::exit(0);
    });

    match serve_with_shutdown(state, listener, async {
        let _ = rx.await;
    })
    .await
    {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

async fn wait_for_shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term.recv() => {}
    }
}

async fn cmd_fixtures_serve(dir: PathBuf, bind: String, delay_ms: Vec<String>) -> ExitCode {
    if !dir.is_dir() {
        return fail(format!("{} is not a directory", dir.display()));
    }
    let mut delays = Vec::new();
    for rule in delay_ms {
        let Some((path, ms)) = rule.split_once('=') else {
            return fail(format!("--delay-ms wants path=milliseconds, got '{rule}'"));
        };
        let Ok(ms) = ms.parse::<u64>() else {
            return fail(format!("--delay-ms wants a millisecond count, got '{ms}'"));
        };
        delays.push((path.to_string(), ms));
    }
    let bind_addr: std::net::SocketAddr = match bind.parse() {
        Ok(a) => a,
        Err(e) => return fail(format!("cannot parse bind address {bind}: {e}")),
    };
    let server = match fixture_server::serve(dir.clone(), bind_addr, delays).await {
        Ok(s) => s,
        Err(e) => return fail(format!("cannot bind {bind}: {e}")),
    };
    eprintln!("serving {} at {}", dir.display(), server.base_url());
    wait_for_shutdown_signal().await;
    server.shutdown().await;
    ExitCode::SUCCESS
}

fn cmd_fixtures_generate(spec: PathBuf, out: PathBuf) -> ExitCode {
    match corpus::generate_fixtures(&spec, &out) {
        Ok(manifest) => {
            eprintln!(
                "generated {} sites under {}",
                manifest.sites.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

async fn cmd_eval(
    corpus_dir: PathBuf,
    truth: PathBuf,
    fixture_addr: String,
    config: Option<PathBuf>,
    format: OutputFormat,
    parallel: usize,
    archive: Option<PathBuf>,
) -> ExitCode {
    let config = match load_config(config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let fixture_base = if fixture_addr.contains("://") {
        fixture_addr
    } else {
        format!("http://{fixture_addr}")
    };
    let archive = archive.map(Archive::new);
    let outcome = corpus::evaluate(EvalOptions {
        corpus_dir: &corpus_dir,
        truth_path: &truth,
        fixture_base: &fixture_base,
        cfg: &config.crawl,
        registry: &config.criteria,
        archive: archive.as_ref(),
        parallel,
    })
    .await;
    let run = match outcome {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    match format {
        OutputFormat::Json => {
            print!(
                "{}",
                serde_json::to_string(&run.metrics).expect("metrics serialize")
            );
        }
        OutputFormat::Text => render_metrics_text(&run.metrics),
    }
    ExitCode::SUCCESS
}

fn render_metrics_text(metrics: &EvalMetrics) {
    println!("sites evaluated: {}", metrics.sites);
    println!();
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
    println!();
    println!("overall accuracy: {:.4}", metrics.accuracy);
    if !metrics.mismatches.is_empty() {
        println!();
        println!("mismatches:");
        for m in &metrics.mismatches {
            let note = if m.note.is_empty() {
                String::new()
            } else {
                format!(" ({})", m.note)
            };
            println!(
                "  {} {}: expected {}, got {}{note}",
                m.site_id,
                m.criterion.as_str(),
                m.expected,
                m.actual
            );
        }
    }
}
