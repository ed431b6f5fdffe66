//! Domain types, the criteria registry, and the configuration schema shared
//! by every other module.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The checkable criteria. The first six map one-to-one onto the boolean
/// result payload; `DoNotSellLink` and `ContactMethods` are auxiliary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriterionId {
    PrivacyNotice,
    CcpaNotice,
    NoticeOfCollection,
    RightToKnow,
    RightToDelete,
    RightToOptOut,
    DoNotSellLink,
    ContactMethods,
}

impl CriterionId {
    pub const ALL: [CriterionId; 8] = [
        CriterionId::PrivacyNotice,
        CriterionId::CcpaNotice,
        CriterionId::NoticeOfCollection,
        CriterionId::RightToKnow,
        CriterionId::RightToDelete,
        CriterionId::RightToOptOut,
        CriterionId::DoNotSellLink,
        CriterionId::ContactMethods,
    ];

    /// The six criteria that feed the boolean result payload and drive
    /// REQUIRED recommendations.
    pub const CORE: [CriterionId; 6] = [
        CriterionId::PrivacyNotice,
        CriterionId::CcpaNotice,
        CriterionId::NoticeOfCollection,
        CriterionId::RightToKnow,
        CriterionId::RightToDelete,
        CriterionId::RightToOptOut,
    ];

    pub fn is_core(self) -> bool {
        Self::CORE.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::PrivacyNotice => "PRIVACY_NOTICE",
            CriterionId::CcpaNotice => "CCPA_NOTICE",
            CriterionId::NoticeOfCollection => "NOTICE_OF_COLLECTION",
            CriterionId::RightToKnow => "RIGHT_TO_KNOW",
            CriterionId::RightToDelete => "RIGHT_TO_DELETE",
            CriterionId::RightToOptOut => "RIGHT_TO_OPT_OUT",
            CriterionId::DoNotSellLink => "DO_NOT_SELL_LINK",
            CriterionId::ContactMethods => "CONTACT_METHODS",
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which crawled pages a criterion is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PageScope {
    /// The depth-0 snapshot only.
    Homepage,
    /// Privacy candidates (anchor score > 0) plus a profile-hinted page.
    PrivacyPages,
    /// Homepage plus privacy candidates.
    HomepageOrPrivacyPages,
    /// Every fetched page.
    AnyPage,
    /// Anchor texts on the homepage, not page body text.
    HomepageAnchors,
}

/// One checkable criterion: interchangeable phrase buckets, a per-page
/// threshold, a page scope, and an optional gating dependency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: CriterionId,
    pub description: String,
    /// Each bucket is a set of interchangeable phrases; a bucket counts once
    /// toward the threshold no matter how many of its phrases occur.
    pub buckets: Vec<Vec<String>>,
    /// Distinct buckets that must match on a single eligible page.
    pub threshold: usize,
    pub scope: PageScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depends_on: Option<CriterionId>,
    /// Additionally match a toll-free phone number pattern; the pattern
    /// counts as one extra bucket toward the threshold.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub match_toll_free: bool,
}

impl CriterionSpec {
    /// Buckets plus the toll-free matcher when enabled.
    pub fn matcher_count(&self) -> usize {
        self.buckets.len() + usize::from(self.match_toll_free)
    }
}

/// A link discovered on a page: absolute normalized URL plus its anchor text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub url: String,
    pub anchor_text: String,
}

/// A fetched page after text and link extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSnapshot {
    /// Hex SHA-256 of the body bytes; deterministic in the body.
    pub snapshot_id: String,
    pub requested_url: String,
    pub final_url: String,
    pub http_status: u16,
    pub fetched_at: DateTime<Utc>,
    pub content_type: String,
    #[serde(with = "body_bytes")]
    pub body: Vec<u8>,
    /// Lowercased, whitespace-collapsed visible text. No markup.
    pub text: String,
    pub links: Vec<Link>,
    /// Numbers captured from tel: hrefs, kept out of `links`.
    pub phone_numbers: Vec<String>,
    /// Crawl depth from the seed; the homepage is 0.
    pub depth: u32,
}

/// Body bytes serialize as lossy UTF-8 for JSON transport; the archive keeps
/// the exact bytes in a separate blob file.
mod body_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&String::from_utf8_lossy(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        String::deserialize(de).map(String::into_bytes)
    }
}

/// A recorded (page, phrase, offset, excerpt) tuple proving a match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub snapshot_id: String,
    pub page_url: String,
    pub matched_phrase: String,
    /// Up to 200 characters of normalized text around the match.
    pub excerpt: String,
    /// Character offset of `matched_phrase` within the snapshot text.
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriterionStatus {
    Found,
    NotFound,
    /// The criterion's dependency was not FOUND, so it was never checked.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: CriterionId,
    pub status: CriterionStatus,
    pub evidence: Vec<EvidenceSpan>,
    /// Distinct buckets matched on the winning page (best page when not found).
    pub matched_bucket_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CompliantSignalsFound,
    CcpaNotFound,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Required,
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub criterion: CriterionId,
    pub severity: Severity,
    pub message: String,
}

/// Error embedded in a report whose verdict is ERROR. `kind` is a stable
/// token the service layer maps onto HTTP statuses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportError {
    pub kind: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

/// The full outcome of one compliance check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub check_id: String,
    pub seed_url: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub pages_fetched: usize,
    pub results: BTreeMap<CriterionId, CriterionResult>,
    /// Winning page of CCPA_NOTICE when found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccpa_page_url: Option<String>,
    pub verdict: Verdict,
    pub recommendations: Vec<Recommendation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complaint_instructions: Option<String>,
    pub snapshot_ids: Vec<String>,
    pub budget_exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
}

/// The boolean projection of a report: SKIPPED and NOT_FOUND both project to
/// false. This is the compact payload service clients consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcpaResult {
    pub privacy_notice: bool,
    pub ccpa_notice: bool,
    pub notice_of_collection: bool,
    pub right_to_know: bool,
    pub right_to_delete: bool,
    pub right_to_opt_out: bool,
}

impl CcpaResult {
    pub fn from_report(report: &ComplianceReport) -> Self {
        let found = |id: CriterionId| {
            report
                .results
                .get(&id)
                .map(|r| r.status == CriterionStatus::Found)
                .unwrap_or(false)
        };
        CcpaResult {
            privacy_notice: found(CriterionId::PrivacyNotice),
            ccpa_notice: found(CriterionId::CcpaNotice),
            notice_of_collection: found(CriterionId::NoticeOfCollection),
            right_to_know: found(CriterionId::RightToKnow),
            right_to_delete: found(CriterionId::RightToDelete),
            right_to_opt_out: found(CriterionId::RightToOptOut),
        }
    }

    pub fn get(&self, id: CriterionId) -> Option<bool> {
        match id {
            CriterionId::PrivacyNotice => Some(self.privacy_notice),
            CriterionId::CcpaNotice => Some(self.ccpa_notice),
            CriterionId::NoticeOfCollection => Some(self.notice_of_collection),
            CriterionId::RightToKnow => Some(self.right_to_know),
            CriterionId::RightToDelete => Some(self.right_to_delete),
            CriterionId::RightToOptOut => Some(self.right_to_opt_out),
            _ => None,
        }
    }
}

/// Service/CLI response body: the report plus its boolean projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResponse {
    pub report: ComplianceReport,
    pub ccpa_result: CcpaResult,
}

/// Per-site crawl hints. `host_pattern` matches any host with the same
/// registrable domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub host_pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy_page_url: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_seeds: Vec<String>,
    #[serde(default)]
    pub notes: String,
}

impl SiteProfile {
    pub fn matches_host(&self, host: &str) -> bool {
        registrable_domain(host) == registrable_domain(&self.host_pattern)
    }
}

/// Registrable domain per the public-suffix list bundled at build time.
/// IP addresses and hosts without a listed suffix fall back to the full
/// host string so "same site" stays well-defined on local fixtures.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok()
        || host
            .trim_matches(['[', ']'])
            .parse::<std::net::IpAddr>()
            .is_ok()
    {
        return host;
    }
    psl::domain_str(&host).map(str::to_owned).unwrap_or(host)
}

/// Crawl budgets and politeness knobs. All durations are milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrawlConfig {
    pub max_pages: usize,
    pub max_depth: u32,
    pub per_fetch_timeout_ms: u64,
    pub total_deadline_ms: u64,
    pub max_body_bytes: usize,
    pub politeness_delay_ms: u64,
    pub parallelism: usize,
    pub same_site_only: bool,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            max_pages: 25,
            max_depth: 2,
            per_fetch_timeout_ms: 10_000,
            total_deadline_ms: 60_000,
            max_body_bytes: 2_000_000,
            politeness_delay_ms: 250,
            parallelism: 4,
            same_site_only: true,
        }
    }
}

impl CrawlConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&str, u64); 7] = [
            ("max_pages", self.max_pages as u64),
            ("max_depth", u64::from(self.max_depth)),
            ("per_fetch_timeout_ms", self.per_fetch_timeout_ms),
            ("total_deadline_ms", self.total_deadline_ms),
            ("max_body_bytes", self.max_body_bytes as u64),
            ("politeness_delay_ms", self.politeness_delay_ms),
            ("parallelism", self.parallelism as u64),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(ConfigError::Schema(format!(
                    "crawl.{name}: must be positive"
                )));
            }
        }
        if self.total_deadline_ms < self.per_fetch_timeout_ms {
            return Err(ConfigError::Schema(
                "crawl.total_deadline_ms: must be >= per_fetch_timeout_ms".into(),
            ));
        }
        Ok(())
    }
}

/// A validated set of criteria with phrases normalized at load time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Registry {
    criteria: Vec<CriterionSpec>,
}

impl Registry {
    pub fn new(criteria: Vec<CriterionSpec>) -> Result<Self, ConfigError> {
        let mut registry = Registry { criteria };
        registry.normalize();
        registry.validate()?;
        Ok(registry)
    }

    pub fn criteria(&self) -> &[CriterionSpec] {
        &self.criteria
    }

    pub fn get(&self, id: CriterionId) -> Option<&CriterionSpec> {
        self.criteria.iter().find(|c| c.id == id)
    }

    /// Criteria ordered so every dependency precedes its dependents.
    /// Declaration order breaks ties, so the order is deterministic.
    pub fn topo_order(&self) -> Vec<&CriterionSpec> {
        let mut emitted: HashSet<CriterionId> = HashSet::new();
        let mut out: Vec<&CriterionSpec> = Vec::with_capacity(self.criteria.len());
        while out.len() < self.criteria.len() {
            let before = out.len();
            for spec in &self.criteria {
                if emitted.contains(&spec.id) {
                    continue;
                }
                let ready = match spec.depends_on {
                    // A dependency outside the registry gates nothing.
                    Some(dep) => emitted.contains(&dep) || self.get(dep).is_none(),
                    None => true,
                };
                if ready {
                    emitted.insert(spec.id);
                    out.push(spec);
                }
            }
            debug_assert!(out.len() > before, "cycle slipped past validation");
        }
        out
    }

    fn normalize(&mut self) {
        for spec in &mut self.criteria {
            for bucket in &mut spec.buckets {
                for phrase in bucket.iter_mut() {
                    *phrase = normalize_phrase(phrase);
                }
                bucket.retain(|p| !p.is_empty());
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for spec in &self.criteria {
            if !seen.insert(spec.id) {
                return Err(ConfigError::Schema(format!(
                    "criteria[{}]: id appears more than once",
                    spec.id
                )));
            }
            if spec.threshold == 0 {
                return Err(ConfigError::Schema(format!(
                    "criteria[{}].threshold: must be >= 1",
                    spec.id
                )));
            }
            if spec.threshold > spec.matcher_count() {
                return Err(ConfigError::Schema(format!(
                    "criteria[{}].threshold: exceeds the number of buckets",
                    spec.id
                )));
            }
            if spec.buckets.is_empty() && !spec.match_toll_free {
                return Err(ConfigError::Schema(format!(
                    "criteria[{}].buckets: must not be empty",
                    spec.id
                )));
            }
            if spec.buckets.iter().any(|b| b.is_empty()) {
                return Err(ConfigError::Schema(format!(
                    "criteria[{}].buckets: bucket has no usable phrases",
                    spec.id
                )));
            }
        }
        self.check_acyclic()?;
        Ok(())
    }

    fn check_acyclic(&self) -> Result<(), ConfigError> {
        for start in &self.criteria {
            let mut trail = vec![start.id];
            let mut current = start.depends_on;
            while let Some(dep) = current {
                if trail.contains(&dep) {
                    trail.push(dep);
                    let chain = trail
                        .iter()
                        .map(|id| id.as_str())
                        .collect::<Vec<_>>()
                        .join(" -> ");
                    return Err(ConfigError::Cycle(chain));
                }
                trail.push(dep);
                current = self.get(dep).and_then(|s| s.depends_on);
            }
        }
        Ok(())
    }
}

/// Lowercase and collapse runs of whitespace to single spaces.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("depends_on cycle: {0}")]
    Cycle(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

/// Top-level configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppConfig {
    pub criteria: Registry,
    #[serde(default)]
    pub site_profiles: Vec<SiteProfile>,
    #[serde(default)]
    pub crawl: CrawlConfig,
}

const DEFAULT_CONFIG: &str = include_str!("default_config.json");

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<AppConfig, ConfigError> {
    let mut config: AppConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
    config.criteria = Registry::new(config.criteria.criteria)?;
    config.crawl.validate()?;
    for profile in &config.site_profiles {
        if let Some(url) = &profile.privacy_page_url {
            let host = url::Url::parse(url)
                .ok()
                .and_then(|u| u.host_str().map(str::to_owned))
                .ok_or_else(|| {
                    ConfigError::Schema(format!(
                        "site_profiles[{}].privacy_page_url: not an absolute URL",
                        profile.host_pattern
                    ))
                })?;
            if !profile.matches_host(&host) {
                return Err(ConfigError::Schema(format!(
                    "site_profiles[{}].privacy_page_url: host is outside the profile's registrable domain",
                    profile.host_pattern
                )));
            }
        }
    }
    Ok(config)
}

/// The registry, profiles, and crawl budget embedded in the binary.
pub fn default_config() -> AppConfig {
    parse_config(DEFAULT_CONFIG).expect("embedded default config is valid")
}

/// The embedded configuration document, byte for byte.
pub fn default_config_text() -> &'static str {
    DEFAULT_CONFIG
}

/// Load configuration from a file, or the embedded defaults when `path` is
/// `None`.
pub fn load_config(path: Option<&Path>) -> Result<AppConfig, ConfigError> {
    match path {
        Some(p) => parse_config(&std::fs::read_to_string(p)?),
        None => Ok(default_config()),
    }
}
