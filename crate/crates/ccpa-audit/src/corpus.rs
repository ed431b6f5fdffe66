//! Fixture-site corpus: declarative static-site generation, ground truth,
//! and an evaluator that measures checker accuracy against it.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;

use crate::archive::Archive;
use crate::engine::{run_check, CheckRun};
use crate::model::{CcpaResult, CrawlConfig, CriterionId, Registry, SiteProfile, Verdict};

/// The corpus spec, curated ground truth, and probe ground truth shipped
/// with the crate. The two probe sites deliberately reproduce the checker's
/// false-positive and false-negative failure modes and are excluded from the
/// curated accuracy figure.
pub const BUNDLED_CORPUS_SPEC: &str = include_str!("../fixtures/corpus.json");
pub const BUNDLED_TRUTH: &str = include_str!("../fixtures/truth.json");
pub const BUNDLED_PROBES_TRUTH: &str = include_str!("../fixtures/probes-truth.json");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing fixture site for truth entry '{0}'")]
    MissingSite(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Ground truth and metrics
// ---------------------------------------------------------------------------

/// Human-reviewed expectation for one fixture site. All six core booleans
/// must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub site_id: String,
    pub expected: CcpaResult,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl CriterionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            1.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mismatch {
    pub site_id: String,
    pub criterion: CriterionId,
    pub expected: bool,
    pub actual: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub sites: usize,
    pub per_criterion: BTreeMap<CriterionId, CriterionCounts>,
    /// (tp + tn) / all cells across the six core criteria.
    pub accuracy: f64,
    pub mismatches: Vec<Mismatch>,
}

impl EvalMetrics {
    pub fn false_positives(&self) -> usize {
        self.per_criterion.values().map(|c| c.fp).sum()
    }

    pub fn false_negatives(&self) -> usize {
        self.per_criterion.values().map(|c| c.fn_).sum()
    }
}

/// One site's finished check within an evaluation run.
#[derive(Debug)]
pub struct SiteCheck {
    pub site_id: String,
    pub run: CheckRun,
}

#[derive(Debug)]
pub struct EvalRun {
    pub metrics: EvalMetrics,
    pub checks: Vec<SiteCheck>,
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

pub struct EvalOptions<'a> {
    /// Directory holding the generated fixture tree (with manifest.json).
    pub corpus_dir: &'a Path,
    pub truth_path: &'a Path,
    /// Base URL of the fixture server serving `corpus_dir`.
    pub fixture_base: &'a str,
    pub cfg: &'a CrawlConfig,
    pub registry: &'a Registry,
    /// When set, every report and snapshot is archived.
    pub archive: Option<&'a Archive>,
    /// Concurrent site checks; 1 evaluates sequentially.
    pub parallel: usize,
}

/// Run the checker against every truth entry and aggregate accuracy.
/// A check whose verdict is ERROR counts as a mismatch on all six criteria.
pub async fn evaluate(opts: EvalOptions<'_>) -> Result<EvalRun, EvalError> {
    let truth_text = std::fs::read_to_string(opts.truth_path).map_err(io_err(opts.truth_path))?;
    let truth = parse_truth(&truth_text)?;
    let manifest_path = opts.corpus_dir.join("manifest.json");
    let manifest_text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: CorpusManifest =
        serde_json::from_str(&manifest_text).map_err(|e| EvalError::Schema(e.to_string()))?;
    let by_id: HashMap<&str, &ManifestSite> =
        manifest.sites.iter().map(|s| (s.id.as_str(), s)).collect();
    let host = url::Url::parse(opts.fixture_base)
        .ok()
        .and_then(|u| u.host_str().map(str::to_owned))
        .ok_or_else(|| EvalError::Schema("fixture_base is not a valid URL".into()))?;

    struct Job {
        entry: GroundTruthEntry,
        seed_url: String,
        profiles: Vec<SiteProfile>,
    }
    let mut jobs = Vec::with_capacity(truth.len());
    for entry in truth {
        let site = by_id
            .get(entry.site_id.as_str())
            .ok_or_else(|| EvalError::MissingSite(entry.site_id.clone()))?;
        if !opts.corpus_dir.join(&site.id).is_dir() {
            return Err(EvalError::MissingSite(entry.site_id.clone()));
        }
        let base = opts.fixture_base.trim_end_matches('/');
        let seed_url = format!("{base}/{}/{}", site.id, site.seed);
        let profiles = site
            .privacy_page_hint
            .as_ref()
            .map(|hint| {
                vec![SiteProfile {
                    host_pattern: host.clone(),
                    privacy_page_url: Some(format!("{base}/{}/{hint}", site.id)),
                    extra_seeds: vec![],
                    notes: format!("fixture hint for {}", site.id),
                }]
            })
            .unwrap_or_default();
        jobs.push(Job {
            entry,
            seed_url,
            profiles,
        });
    }

    let mut checks: Vec<Option<SiteCheck>> = Vec::with_capacity(jobs.len());
    checks.resize_with(jobs.len(), || None);
    let parallel = opts.parallel.max(1);
    let mut entries: Vec<GroundTruthEntry> = Vec::with_capacity(jobs.len());
    if parallel == 1 {
        for (idx, job) in jobs.into_iter().enumerate() {
            let run = run_check(&job.seed_url, opts.cfg, opts.registry, &job.profiles, None).await;
            checks[idx] = Some(SiteCheck {
                site_id: job.entry.site_id.clone(),
                run,
            });
            entries.push(job.entry);
        }
    } else {
        let mut set: JoinSet<(usize, SiteCheck)> = JoinSet::new();
        let mut pending = jobs.into_iter().enumerate().collect::<Vec<_>>();
        entries = pending.iter().map(|(_, j)| j.entry.clone()).collect();
        pending.reverse();
        let mut in_flight = 0usize;
        loop {
            while in_flight < parallel {
                let Some((idx, job)) = pending.pop() else {
                    break;
                };
                let cfg = opts.cfg.clone();
                let registry = opts.registry.clone();
                set.spawn(async move {
                    let run = run_check(&job.seed_url, &cfg, &registry, &job.profiles, None).await;
                    (
                        idx,
                        SiteCheck {
                            site_id: job.entry.site_id.clone(),
                            run,
                        },
                    )
                });
                in_flight += 1;
            }
            let Some(joined) = set.join_next().await else {
                break;
            };
            in_flight -= 1;
            if let Ok((idx, check)) = joined {
                checks[idx] = Some(check);
            }
        }
    }
    let checks: Vec<SiteCheck> = checks.into_iter().flatten().collect();

    if let Some(archive) = opts.archive {
        for check in &checks {
            archive
                .store(&check.run.report, &check.run.snapshots)
                .map_err(|e| EvalError::Schema(format!("archive failure: {e}")))?;
        }
    }

    let mut per_criterion: BTreeMap<CriterionId, CriterionCounts> = CriterionId::CORE
        .iter()
        .map(|&id| (id, CriterionCounts::default()))
        .collect();
    let mut mismatches = Vec::new();
    for (entry, check) in entries.iter().zip(&checks) {
        let errored = check.run.report.verdict == Verdict::Error;
        let actual = CcpaResult::from_report(&check.run.report);
        for id in CriterionId::CORE {
            let expected = entry.expected.get(id).unwrap_or(false);
            let counts = per_criterion.get_mut(&id).expect("core id present");
            if errored {
                // Check errors are mismatches on every criterion for the site.
                if expected {
                    counts.fn_ += 1;
                } else {
                    counts.fp += 1;
                }
                mismatches.push(Mismatch {
                    site_id: entry.site_id.clone(),
                    criterion: id,
                    expected,
                    actual: false,
                    note: "check error".into(),
                });
                continue;
            }
            let got = actual.get(id).unwrap_or(false);
            match (expected, got) {
                (true, true) => counts.tp += 1,
                (false, false) => counts.tn += 1,
                (false, true) => {
                    counts.fp += 1;
                    mismatches.push(Mismatch {
                        site_id: entry.site_id.clone(),
                        criterion: id,
                        expected,
                        actual: got,
                        note: String::new(),
                    });
                }
                (true, false) => {
                    counts.fn_ += 1;
                    mismatches.push(Mismatch {
                        site_id: entry.site_id.clone(),
                        criterion: id,
                        expected,
                        actual: got,
                        note: String::new(),
                    });
                }
            }
        }
    }

    let (hits, total) = per_criterion.values().fold((0usize, 0usize), |acc, c| {
        (acc.0 + c.tp + c.tn, acc.1 + c.total())
    });
    let accuracy = if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    };

    Ok(EvalRun {
        metrics: EvalMetrics {
            sites: checks.len(),
            per_criterion,
            accuracy,
            mismatches,
        },
        checks,
    })
}

pub fn parse_truth(text: &str) -> Result<Vec<GroundTruthEntry>, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Schema(e.to_string()))
}

// ---------------------------------------------------------------------------
// Fixture generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub sites: Vec<SiteSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteSpec {
    pub id: String,
    #[serde(default = "default_seed")]
    pub seed: String,
    /// Relative path handed to a SiteProfile during evaluation.
    #[serde(default)]
    pub privacy_page_hint: Option<String>,
    pub pages: Vec<PageSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageSpec {
    pub path: String,
    pub title: String,
    #[serde(default)]
    pub paragraphs: Vec<String>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub hidden_paragraphs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSpec {
    pub href: String,
    pub text: String,
}

fn default_seed() -> String {
    "index.html".to_string()
}

/// What `generate_fixtures` wrote: enough for an evaluator to seed checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub sites: Vec<ManifestSite>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSite {
    pub id: String,
    pub seed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy_page_hint: Option<String>,
}

pub fn parse_fixture_spec(text: &str) -> Result<FixtureSpec, EvalError> {
    let spec: FixtureSpec =
        serde_json::from_str(text).map_err(|e| EvalError::Schema(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    for site in &spec.sites {
        if site.id.is_empty() || !seen.insert(site.id.as_str()) {
            return Err(EvalError::Schema(format!(
                "sites[{}].id: empty or duplicate",
                site.id
            )));
        }
        if !site.pages.iter().any(|p| p.path == site.seed) {
            return Err(EvalError::Schema(format!(
                "sites[{}].seed: no page with path '{}'",
                site.id, site.seed
            )));
        }
        for page in &site.pages {
            let p = Path::new(&page.path);
            if p.is_absolute() || page.path.split('/').any(|seg| seg == "..") {
                return Err(EvalError::Schema(format!(
                    "sites[{}].pages[{}].path: must be relative without ..",
                    site.id, page.path
                )));
            }
        }
    }
    Ok(spec)
}

/// Materialize a fixture spec file into a static site tree under `out_dir`
/// and write `manifest.json` beside it. Output is byte-deterministic in the
/// spec.
pub fn generate_fixtures(spec_path: &Path, out_dir: &Path) -> Result<CorpusManifest, EvalError> {
    let text = std::fs::read_to_string(spec_path).map_err(io_err(spec_path))?;
    let spec = parse_fixture_spec(&text)?;
    generate_fixtures_from_spec(&spec, out_dir)
}

pub fn generate_fixtures_from_spec(
    spec: &FixtureSpec,
    out_dir: &Path,
) -> Result<CorpusManifest, EvalError> {
    for site in &spec.sites {
        for page in &site.pages {
            let path = out_dir.join(&site.id).join(&page.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::write(&path, render_page(page)).map_err(io_err(&path))?;
        }
    }
    let manifest = CorpusManifest {
        sites: spec
            .sites
            .iter()
            .map(|s| ManifestSite {
                id: s.id.clone(),
                seed: s.seed.clone(),
                privacy_page_hint: s.privacy_page_hint.clone(),
            })
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    std::fs::write(&manifest_path, bytes).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn render_page(page: &PageSpec) -> String {
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    html.push_str(&format!("<title>{}</title>\n", escape_html(&page.title)));
    html.push_str("</head>\n<body>\n");
    html.push_str(&format!("<h1>{}</h1>\n", escape_html(&page.title)));
    if !page.links.is_empty() {
        html.push_str("<nav>\n<ul>\n");
        for link in &page.links {
            html.push_str(&format!(
                "<li><a href=\"{}\">{}</a></li>\n",
                escape_html(&link.href),
                escape_html(&link.text)
            ));
        }
        html.push_str("</ul>\n</nav>\n");
    }
    html.push_str("<main>\n");
    for paragraph in &page.paragraphs {
        html.push_str(&format!("<p>{}</p>\n", escape_html(paragraph)));
    }
    for hidden in &page.hidden_paragraphs {
        html.push_str(&format!("<p hidden>{}</p>\n", escape_html(hidden)));
    }
    html.push_str("</main>\n</body>\n</html>\n");
    html
}

/// Parse the corpus spec shipped with the crate.
pub fn bundled_fixture_spec() -> FixtureSpec {
    parse_fixture_spec(BUNDLED_CORPUS_SPEC).expect("bundled corpus spec is valid")
}
