//! Privacy-compliance audit engine.
//!
//! Crawls a target website within a configurable budget, evaluates a
//! dependency-gated registry of CCPA criteria by evidence-backed keyword
//! matching over extracted page text, and produces structured compliance
//! reports with remediation recommendations and complaint-filing
//! instructions.
//!
//! The pipeline: [`fetch`] retrieves pages politely, [`extract`] turns HTML
//! into normalized text and links, [`crawl`] runs a bounded BFS that ranks
//! privacy-page candidates, [`engine`] matches the criteria registry with
//! dependency gating and assembles the report, [`archive`] persists reports
//! and page snapshots, [`service`] exposes the HTTP API, and [`corpus`]
//! evaluates accuracy against a bundled fixture corpus.
//!
//! ```no_run
//! use ccpa_audit::engine::run_check;
//! use ccpa_audit::model::default_config;
//!
//! # async fn demo() {
//! let config = default_config();
//! let run = run_check(
//!     "example.com",
//!     &config.crawl,
//!     &config.criteria,
//!     &config.site_profiles,
//!     None,
//! )
//! .await;
//! println!("{:?}", run.report.verdict);
//! # }
//! ```
//!
//! See the crate's `examples/` directory for one runnable example per
//! capability, and the `ccpa-audit` binary for the CLI.

pub mod archive;
pub mod corpus;
pub mod crawl;
pub mod engine;
pub mod extract;
pub mod fetch;
pub mod fixture_server;
pub mod model;
pub mod service;

pub use engine::{run_check, CheckRun};
pub use fetch::{normalize_url, FetchError, FetchErrorKind, Fetcher, USER_AGENT};
pub use model::{
    CcpaResult, CheckResponse, ComplianceReport, CrawlConfig, CriterionId, CriterionResult,
    CriterionStatus, Registry, SiteProfile, Verdict,
};
