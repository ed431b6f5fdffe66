//! Evaluate the criteria registry over a crawl with dependency gating and
//! assemble the compliance report.
//!
//! Matching is per-page: a criterion is FOUND only when a single eligible
//! page matches at least `threshold` distinct buckets. Phrases are matched
//! as substrings of the normalized page text with word-boundary guards at
//! both ends, so "ccpa" does not match inside "accpax".

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use tokio::time::Instant;
use uuid::Uuid;

use crate::crawl::{crawl_site, CrawlResult};
use crate::fetch::{normalize_url, FetchErrorKind, Fetcher};
use crate::model::{
    ComplianceReport, CrawlConfig, CriterionId, CriterionResult, CriterionSpec, CriterionStatus,
    EvidenceSpan, PageScope, PageSnapshot, Recommendation, Registry, ReportError, Severity,
    SiteProfile, Verdict,
};

/// Report error token for a check that ran out of its total deadline before
/// the homepage was processed.
pub const DEADLINE_EXCEEDED: &str = "DEADLINE_EXCEEDED";

const TOLL_FREE_PREFIXES: [&str; 7] = ["800", "833", "844", "855", "866", "877", "888"];

/// A completed check: the report plus the snapshots it references, ready for
/// archiving.
#[derive(Debug, Clone)]
pub struct CheckRun {
    pub report: ComplianceReport,
    pub snapshots: Vec<PageSnapshot>,
}

/// First boundary-valid occurrence of `phrase` in `text` (byte offset).
/// Both ends of the occurrence must not touch an alphanumeric character.
pub fn find_phrase(text: &str, phrase: &str) -> Option<usize> {
    if phrase.is_empty() {
        return None;
    }
    let mut search_from = 0;
    while let Some(relative) = text[search_from..].find(phrase) {
        let at = search_from + relative;
        let end = at + phrase.len();
        let left_ok = at == 0
            || text[..at]
                .chars()
                .next_back()
                .is_none_or(|c| !c.is_alphanumeric());
        let right_ok = end == text.len()
            || text[end..]
                .chars()
                .next()
                .is_none_or(|c| !c.is_alphanumeric());
        if left_ok && right_ok {
            return Some(at);
        }
        search_from = at + phrase.len().max(1);
    }
    None
}

/// First toll-free US number in `text`: optional country code 1, then ten
/// digits whose area code is in the toll-free set, with spaces, dots,
/// dashes, and parentheses as separators. Returns (byte offset, matched
/// substring).
pub fn find_toll_free(text: &str) -> Option<(usize, String)> {
    let bytes = text.as_bytes();
    for (i, &c) in bytes.iter().enumerate() {
        let candidate_start = (c.is_ascii_digit() || c == b'(' || c == b'+')
            && (i == 0 || !bytes[i - 1].is_ascii_digit());
        if !candidate_start {
            continue;
        }
        if let Some(end) = toll_free_end(bytes, i) {
            return Some((i, text[i..end].to_string()));
        }
    }
    None
}

/// Byte offset just past a toll-free number starting at `start`, if any.
fn toll_free_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut digit_ends: Vec<usize> = Vec::with_capacity(11);
    let mut digits = String::new();
    let mut j = start;
    while j < bytes.len() && digits.len() < 11 && j - start <= 24 {
        let c = bytes[j];
        if c.is_ascii_digit() {
            digits.push(c as char);
            digit_ends.push(j + 1);
        } else if !matches!(c, b' ' | b'-' | b'.' | b'(' | b')' | b'+') {
            break;
        }
        j += 1;
    }
    let (skip, national_len) = if digits.starts_with('1') && digits.len() >= 11 {
        (1, 10)
    } else if !digits.starts_with('1') && digits.len() >= 10 {
        (0, 10)
    } else {
        return None;
    };
    let national = &digits[skip..skip + national_len];
    if !TOLL_FREE_PREFIXES.contains(&&national[..3]) {
        return None;
    }
    let end = digit_ends[skip + national_len - 1];
    // The run must not continue with more digits.
    if bytes.get(end).is_some_and(u8::is_ascii_digit) {
        return None;
    }
    Some(end)
}

struct BucketMatch {
    phrase: String,
    offset: usize,
}

fn match_buckets_on_text(spec: &CriterionSpec, text: &str) -> Vec<BucketMatch> {
    let mut matches = Vec::new();
    for bucket in &spec.buckets {
        for phrase in bucket {
            if let Some(offset) = find_phrase(text, phrase) {
                matches.push(BucketMatch {
                    phrase: phrase.clone(),
                    offset,
                });
                break;
            }
        }
    }
    if spec.match_toll_free {
        if let Some((offset, matched)) = find_toll_free(text) {
            matches.push(BucketMatch {
                phrase: matched,
                offset,
            });
        }
    }
    matches
}

/// Anchor-scope matching: a bucket matches when one of its phrases occurs in
/// some anchor text on the page. Evidence still cites the page text, so a
/// phrase that cannot be located there (for example an anchor inside hidden
/// markup) does not count.
fn match_buckets_on_anchors(spec: &CriterionSpec, page: &PageSnapshot) -> Vec<BucketMatch> {
    let mut matches = Vec::new();
    for bucket in &spec.buckets {
        let mut bucket_match = None;
        'bucket: for phrase in bucket {
            for link in &page.links {
                if find_phrase(&link.anchor_text, phrase).is_some() {
                    if let Some(offset) = find_phrase(&page.text, phrase) {
                        bucket_match = Some(BucketMatch {
                            phrase: phrase.clone(),
                            offset,
                        });
                        break 'bucket;
                    }
                }
            }
        }
        if let Some(m) = bucket_match {
            matches.push(m);
        }
    }
    if spec.match_toll_free {
        if let Some((offset, matched)) = find_toll_free(&page.text) {
            matches.push(BucketMatch {
                phrase: matched,
                offset,
            });
        }
    }
    matches
}

/// Eligible snapshot indices for a scope, in deterministic match order.
fn eligible_pages(scope: PageScope, crawl: &CrawlResult) -> Vec<usize> {
    match scope {
        PageScope::Homepage | PageScope::HomepageAnchors => vec![crawl.homepage],
        PageScope::PrivacyPages => crawl.privacy_candidates.iter().map(|&(i, _)| i).collect(),
        PageScope::HomepageOrPrivacyPages => {
            let mut pages = vec![crawl.homepage];
            for &(i, _) in &crawl.privacy_candidates {
                if i != crawl.homepage {
                    pages.push(i);
                }
            }
            pages
        }
        PageScope::AnyPage => (0..crawl.snapshots.len()).collect(),
    }
}

fn excerpt_around(text: &str, offset: usize, match_len: usize) -> String {
    const BUDGET: usize = 200;
    let span = match_len.min(BUDGET);
    let margin = (BUDGET - span) / 2;
    let mut start = offset.saturating_sub(margin);
    let mut end = (offset + span + margin).min(text.len());
    while start > 0 && !text.is_char_boundary(start) {
        start -= 1;
    }
    while end < text.len() && !text.is_char_boundary(end) {
        end += 1;
    }
    text[start..end].chars().take(BUDGET).collect()
}

/// Evaluate one criterion over the crawl. Dependency gating is the caller's
/// concern; absence of matches yields NOT_FOUND, never an error.
pub fn match_criterion(spec: &CriterionSpec, crawl: &CrawlResult) -> CriterionResult {
    let mut best = 0usize;
    for idx in eligible_pages(spec.scope, crawl) {
        let page = &crawl.snapshots[idx];
        let matches = if spec.scope == PageScope::HomepageAnchors {
            match_buckets_on_anchors(spec, page)
        } else {
            match_buckets_on_text(spec, &page.text)
        };
        if matches.len() >= spec.threshold {
            let evidence = matches
                .iter()
                .map(|m| EvidenceSpan {
                    snapshot_id: page.snapshot_id.clone(),
                    page_url: page.final_url.clone(),
                    matched_phrase: m.phrase.clone(),
                    excerpt: excerpt_around(&page.text, m.offset, m.phrase.len()),
                    offset: m.offset,
                })
                .collect();
            return CriterionResult {
                id: spec.id,
                status: CriterionStatus::Found,
                evidence,
                matched_bucket_count: matches.len(),
            };
        }
        best = best.max(matches.len());
    }
    CriterionResult {
        id: spec.id,
        status: CriterionStatus::NotFound,
        evidence: Vec::new(),
        matched_bucket_count: best,
    }
}

fn skipped(id: CriterionId) -> CriterionResult {
    CriterionResult {
        id,
        status: CriterionStatus::Skipped,
        evidence: Vec::new(),
        matched_bucket_count: 0,
    }
}

/// Evaluate every registry criterion over a finished crawl, applying
/// dependency gating in topological order.
pub fn evaluate_registry(
    registry: &Registry,
    crawl: &CrawlResult,
) -> BTreeMap<CriterionId, CriterionResult> {
    let mut results: BTreeMap<CriterionId, CriterionResult> = BTreeMap::new();
    for spec in registry.topo_order() {
        let gated = spec
            .depends_on
            .filter(|dep| registry.get(*dep).is_some())
            .map(|dep| {
                results
                    .get(&dep)
                    .map(|r| r.status != CriterionStatus::Found)
                    .unwrap_or(true)
            })
            .unwrap_or(false);
        let result = if gated {
            skipped(spec.id)
        } else {
            match_criterion(spec, crawl)
        };
        results.insert(spec.id, result);
    }
    results
}

/// One REQUIRED recommendation per missing core criterion, one ADVISORY per
/// missing auxiliary criterion; none for FOUND results.
pub fn recommend(
    results: &BTreeMap<CriterionId, CriterionResult>,
    registry: &Registry,
) -> Vec<Recommendation> {
    let mut out = Vec::new();
    for spec in registry.criteria() {
        let Some(result) = results.get(&spec.id) else {
            continue;
        };
        if result.status == CriterionStatus::Found {
            continue;
        }
        let recommendation = if spec.id.is_core() {
            Recommendation {
                criterion: spec.id,
                severity: Severity::Required,
                message: format!(
                    "{}: {}. Add this disclosure to the site's privacy materials; \
                     CCPA violations carry civil penalties of $2,500 per violation \
                     or $7,500 per intentional violation.",
                    spec.id, spec.description
                ),
            }
        } else {
            Recommendation {
                criterion: spec.id,
                severity: Severity::Advisory,
                message: format!(
                    "{}: {}. Recommended so consumers can reach privacy controls directly.",
                    spec.id, spec.description
                ),
            }
        };
        out.push(recommendation);
    }
    out
}

const COMPLAINT_TEMPLATE: &str = "\
HOW TO FILE A CCPA COMPLAINT (template v1)

No CCPA notice was detected during audit {check_id}. California consumers
can raise this with the Office of the Attorney General:

  1. Open the consumer complaint page at
     https://oag.ca.gov/contact/consumer-complaint-against-business-or-company
  2. Describe the CCPA disclosures that are missing from the website you
     audited.
  3. Attach the audit report and its archived page snapshots as supporting
     material.

Businesses that violate the CCPA face civil penalties of $2,500 per
violation or $7,500 per intentional violation.
";

/// The static complaint-instructions template. Contains a `{check_id}`
/// placeholder exactly once.
pub fn complaint_instructions() -> &'static str {
    COMPLAINT_TEMPLATE
}

pub fn render_complaint_instructions(check_id: &str) -> String {
    COMPLAINT_TEMPLATE.replace("{check_id}", check_id)
}

fn error_report(
    check_id: String,
    seed_url: String,
    started_at: chrono::DateTime<Utc>,
    kind: &str,
    detail: String,
    url: Option<String>,
) -> CheckRun {
    CheckRun {
        report: ComplianceReport {
            check_id,
            seed_url,
            started_at,
            finished_at: Utc::now(),
            pages_fetched: 0,
            results: BTreeMap::new(),
            ccpa_page_url: None,
            verdict: Verdict::Error,
            recommendations: Vec::new(),
            complaint_instructions: None,
            snapshot_ids: Vec::new(),
            budget_exhausted: false,
            error: Some(ReportError {
                kind: kind.to_string(),
                detail,
                url,
            }),
        },
        snapshots: Vec::new(),
    }
}

fn select_profile<'a>(
    profiles: &'a [SiteProfile],
    seed_url: &str,
    hint: Option<&str>,
) -> Option<&'a SiteProfile> {
    if let Some(host) = hint {
        return profiles.iter().find(|p| p.matches_host(host));
    }
    let host = url::Url::parse(seed_url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_owned))?;
    profiles.iter().find(|p| p.matches_host(&host))
}

/// Run one complete check: normalize, select a profile, crawl, evaluate with
/// gating, and assemble the report. Failures surface as a report with
/// verdict ERROR rather than as a Rust error.
pub async fn run_check(
    seed: &str,
    cfg: &CrawlConfig,
    registry: &Registry,
    profiles: &[SiteProfile],
    profile_hint: Option<&str>,
) -> CheckRun {
    let started_at = Utc::now();
    let check_id = Uuid::new_v4().to_string();
    let deadline = Instant::now() + Duration::from_millis(cfg.total_deadline_ms);

    let seed_url = match normalize_url(seed) {
        Ok(url) => url,
        Err(e) => {
            return error_report(
                check_id,
                seed.trim().to_string(),
                started_at,
                e.kind.token(),
                e.detail,
                None,
            );
        }
    };

    let profile = select_profile(profiles, &seed_url, profile_hint);
    let fetcher = match Fetcher::new(cfg) {
        Ok(f) => Arc::new(f),
        Err(e) => {
            return error_report(
                check_id,
                seed_url,
                started_at,
                e.kind.token(),
                e.detail,
                None,
            );
        }
    };

    // The https default on bare hosts gets a single automatic http fallback
    // when the connection itself fails.
    let scheme_was_defaulted = !seed.trim().contains("://");
    let mut seed_url = seed_url;
    let mut attempt = crawl_site(Arc::clone(&fetcher), &seed_url, cfg, profile, deadline).await;
    if let Err(e) = &attempt {
        if scheme_was_defaulted
            && e.kind == FetchErrorKind::ConnectFailure
            && Instant::now() < deadline
        {
            if let Some(rest) = seed_url.strip_prefix("https://") {
                let fallback = format!("http://{rest}");
                // A failed fallback keeps the original https error.
                if let Ok(c) =
                    crawl_site(Arc::clone(&fetcher), &fallback, cfg, profile, deadline).await
                {
                    seed_url = fallback;
                    attempt = Ok(c);
                }
            }
        }
    }
    let crawl = match attempt {
        Ok(c) => c,
        Err(e) => {
            let kind = if Instant::now() >= deadline {
                DEADLINE_EXCEEDED
            } else {
                e.kind.token()
            };
            return error_report(check_id, seed_url, started_at, kind, e.detail, Some(e.url));
        }
    };

    let results = evaluate_registry(registry, &crawl);
    let ccpa_found = results
        .get(&CriterionId::CcpaNotice)
        .map(|r| r.status == CriterionStatus::Found)
        .unwrap_or(false);
    let verdict = if ccpa_found {
        Verdict::CompliantSignalsFound
    } else {
        Verdict::CcpaNotFound
    };
    let ccpa_page_url = results
        .get(&CriterionId::CcpaNotice)
        .and_then(|r| r.evidence.first())
        .map(|e| e.page_url.clone());
    let recommendations = recommend(&results, registry);
    let complaint_instructions =
        (verdict == Verdict::CcpaNotFound).then(|| render_complaint_instructions(&check_id));

    let report = ComplianceReport {
        check_id,
        seed_url,
        started_at,
        finished_at: Utc::now(),
        pages_fetched: crawl.snapshots.len(),
        results,
        ccpa_page_url,
        verdict,
        recommendations,
        complaint_instructions,
        snapshot_ids: crawl
            .snapshots
            .iter()
            .map(|s| s.snapshot_id.clone())
            .collect(),
        budget_exhausted: crawl.budget_exhausted,
        error: None,
    };
    CheckRun {
        report,
        snapshots: crawl.snapshots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fetch::snapshot_id;
    use crate::model::{default_config, Link};

    pub(crate) fn snapshot(url: &str, depth: u32, text: &str, links: Vec<Link>) -> PageSnapshot {
        let body = text.as_bytes().to_vec();
        PageSnapshot {
            snapshot_id: snapshot_id(&body),
            requested_url: url.to_string(),
            final_url: url.to_string(),
            http_status: 200,
            fetched_at: Utc::now(),
            content_type: "text/html".to_string(),
            body,
            text: text.to_string(),
            links,
            phone_numbers: Vec::new(),
            depth,
        }
    }

    fn crawl_of(snapshots: Vec<PageSnapshot>, privacy: Vec<(usize, i64)>) -> CrawlResult {
        CrawlResult {
            snapshots,
            homepage: 0,
            privacy_candidates: privacy,
            budget_exhausted: false,
            errors: Vec::new(),
        }
    }

    #[test]
    fn phrase_boundaries_are_guarded() {
        assert_eq!(find_phrase("we support ccpa here", "ccpa"), Some(11));
        assert_eq!(find_phrase("accpax", "ccpa"), None);
        assert_eq!(find_phrase("ccpachecker tool", "ccpa"), None);
        assert_eq!(find_phrase("ccpa. yes", "ccpa"), Some(0));
        assert_eq!(find_phrase("see (ccpa)", "ccpa"), Some(5));
        // Later boundary-valid occurrence still found.
        assert_eq!(find_phrase("accpax then ccpa", "ccpa"), Some(12));
    }

    #[test]
    fn toll_free_numbers_are_detected() {
        for sample in [
            "call 1-800-555-0100 today",
            "call (833) 555-0100 today",
            "call 888.555.0100 today",
            "call +1 855 555 0100 today",
            "call 8665550100 today",
        ] {
            let (offset, matched) = find_toll_free(sample).unwrap_or_else(|| {
                panic!("no toll-free found in {sample:?}");
            });
            assert_eq!(&sample[offset..offset + matched.len()], matched);
        }
        assert!(
            find_toll_free("call 1-212-555-0100").is_none(),
            "not toll-free"
        );
        assert!(find_toll_free("order 88855501 only").is_none(), "too short");
        assert!(
            find_toll_free("id 8885550100123456").is_none(),
            "longer digit run"
        );
        assert!(find_toll_free("no numbers here").is_none());
    }

    #[test]
    fn single_phrase_match_is_found_with_evidence() {
        let registry = default_config().criteria;
        let spec = registry.get(CriterionId::RightToDelete).unwrap();
        let text = "you have the right to delete your data and may request deletion at any time";
        let crawl = crawl_of(
            vec![
                snapshot("https://a.com/", 0, "welcome", vec![]),
                snapshot("https://a.com/privacy", 1, text, vec![]),
            ],
            vec![(1, 14)],
        );
        let result = match_criterion(spec, &crawl);
        assert_eq!(result.status, CriterionStatus::Found);
        assert!(!result.evidence.is_empty());
        assert!(result.matched_bucket_count >= 1);
        let span = &result.evidence[0];
        assert_eq!(
            &crawl.snapshots[1].text[span.offset..span.offset + span.matched_phrase.len()],
            span.matched_phrase
        );
    }

    #[test]
    fn privacy_scope_with_no_candidates_is_not_found() {
        let registry = default_config().criteria;
        let spec = registry.get(CriterionId::CcpaNotice).unwrap();
        let crawl = crawl_of(
            vec![snapshot(
                "https://a.com/",
                0,
                "ccpa everywhere but no privacy page",
                vec![],
            )],
            vec![],
        );
        let result = match_criterion(spec, &crawl);
        assert_eq!(result.status, CriterionStatus::NotFound);
        assert!(result.evidence.is_empty());
    }

    #[test]
    fn keyword_decoy_page_is_the_documented_false_positive() {
        // A page about CCPA tooling, not an actual policy: keywords alone
        // satisfy the matcher.
        let registry = default_config().criteria;
        let spec = registry.get(CriterionId::CcpaNotice).unwrap();
        let text = "our scanner reads your privacy policy and looks for ccpa wording";
        let crawl = crawl_of(
            vec![
                snapshot("https://a.com/", 0, "welcome", vec![]),
                snapshot("https://a.com/privacy-tools", 1, text, vec![]),
            ],
            vec![(1, 6)],
        );
        assert_eq!(match_criterion(spec, &crawl).status, CriterionStatus::Found);
    }

    #[test]
    fn threshold_requires_distinct_buckets_on_one_page() {
        let spec = CriterionSpec {
            id: CriterionId::NoticeOfCollection,
            description: String::new(),
            buckets: vec![
                vec!["alpha one".into(), "alpha two".into()],
                vec!["beta one".into()],
            ],
            threshold: 2,
            scope: PageScope::AnyPage,
            depends_on: None,
            match_toll_free: false,
        };
        // Both phrases from the same bucket: count 1, not found.
        let one_bucket = crawl_of(
            vec![snapshot(
                "https://a.com/",
                0,
                "alpha one and alpha two",
                vec![],
            )],
            vec![],
        );
        let r = match_criterion(&spec, &one_bucket);
        assert_eq!(r.status, CriterionStatus::NotFound);
        assert_eq!(r.matched_bucket_count, 1);
        // Spread across two pages: still not found (per-page aggregation).
        let split = crawl_of(
            vec![
                snapshot("https://a.com/", 0, "alpha one", vec![]),
                snapshot("https://a.com/b", 1, "beta one", vec![]),
            ],
            vec![],
        );
        assert_eq!(
            match_criterion(&spec, &split).status,
            CriterionStatus::NotFound
        );
        // Both buckets on one page: found with two evidence spans.
        let both = crawl_of(
            vec![snapshot(
                "https://a.com/",
                0,
                "alpha two near beta one",
                vec![],
            )],
            vec![],
        );
        let r = match_criterion(&spec, &both);
        assert_eq!(r.status, CriterionStatus::Found);
        assert_eq!(r.evidence.len(), 2);
    }

    #[test]
    fn anchor_scope_needs_a_link_not_just_text() {
        let registry = default_config().criteria;
        let spec = registry.get(CriterionId::DoNotSellLink).unwrap();
        let with_link = crawl_of(
            vec![snapshot(
                "https://a.com/",
                0,
                "footer do not sell my personal information",
                vec![Link {
                    url: "https://a.com/do-not-sell".into(),
                    anchor_text: "do not sell my personal information".into(),
                }],
            )],
            vec![],
        );
        assert_eq!(
            match_criterion(spec, &with_link).status,
            CriterionStatus::Found
        );

        let text_only = crawl_of(
            vec![snapshot(
                "https://a.com/",
                0,
                "we do not sell my personal information ever",
                vec![],
            )],
            vec![],
        );
        assert_eq!(
            match_criterion(spec, &text_only).status,
            CriterionStatus::NotFound
        );
    }

    #[test]
    fn contact_methods_matches_toll_free_number() {
        let registry = default_config().criteria;
        let spec = registry.get(CriterionId::ContactMethods).unwrap();
        let crawl = crawl_of(
            vec![snapshot(
                "https://a.com/",
                0,
                "reach us at 1-844-555-0100 for privacy requests",
                vec![],
            )],
            vec![],
        );
        let result = match_criterion(spec, &crawl);
        assert_eq!(result.status, CriterionStatus::Found);
        assert_eq!(result.evidence[0].matched_phrase, "1-844-555-0100");
    }

    #[test]
    fn gating_skips_dependents_when_privacy_missing() {
        let registry = default_config().criteria;
        let crawl = crawl_of(
            vec![snapshot("https://a.com/", 0, "just a landing page", vec![])],
            vec![],
        );
        let results = evaluate_registry(&registry, &crawl);
        assert_eq!(
            results[&CriterionId::PrivacyNotice].status,
            CriterionStatus::NotFound
        );
        for id in [
            CriterionId::CcpaNotice,
            CriterionId::NoticeOfCollection,
            CriterionId::RightToKnow,
            CriterionId::RightToDelete,
            CriterionId::RightToOptOut,
        ] {
            assert_eq!(results[&id].status, CriterionStatus::Skipped, "{id}");
            assert!(results[&id].evidence.is_empty());
        }
        assert_eq!(results.len(), registry.criteria().len());
    }

    #[test]
    fn recommendations_cover_missing_core_and_auxiliary() {
        let registry = default_config().criteria;
        let crawl = crawl_of(
            vec![snapshot("https://a.com/", 0, "nothing relevant", vec![])],
            vec![],
        );
        let results = evaluate_registry(&registry, &crawl);
        let recs = recommend(&results, &registry);
        let noc = recs
            .iter()
            .find(|r| r.criterion == CriterionId::NoticeOfCollection)
            .unwrap();
        assert_eq!(noc.severity, Severity::Required);
        assert!(noc.message.contains("$2,500"));
        assert!(noc.message.contains("$7,500"));
        let dnsl = recs
            .iter()
            .find(|r| r.criterion == CriterionId::DoNotSellLink)
            .unwrap();
        assert_eq!(dnsl.severity, Severity::Advisory);
    }

    #[test]
    fn no_recommendations_when_everything_is_found() {
        let registry = default_config().criteria;
        let mut results = BTreeMap::new();
        for spec in registry.criteria() {
            results.insert(
                spec.id,
                CriterionResult {
                    id: spec.id,
                    status: CriterionStatus::Found,
                    evidence: vec![],
                    matched_bucket_count: 1,
                },
            );
        }
        assert!(recommend(&results, &registry).is_empty());
    }

    #[test]
    fn complaint_template_is_stable_and_renders_once() {
        assert!(complaint_instructions().contains("Office of the Attorney General"));
        assert_eq!(complaint_instructions(), complaint_instructions());
        assert_eq!(complaint_instructions().matches("{check_id}").count(), 1);
        let rendered = render_complaint_instructions("abc");
        assert_eq!(rendered.matches("abc").count(), 1);
        assert!(!rendered.contains("{check_id}"));
    }

    #[test]
    fn adding_a_page_never_flips_found_to_not_found() {
        let registry = default_config().criteria;
        let homepage = snapshot(
            "https://a.com/",
            0,
            "welcome, see our privacy policy and call toll-free 1-800-555-0100",
            vec![
                Link {
                    url: "https://a.com/privacy".into(),
                    anchor_text: "privacy policy".into(),
                },
                Link {
                    url: "https://a.com/do-not-sell".into(),
                    anchor_text: "do not sell my personal information".into(),
                },
            ],
        );
        let privacy = snapshot(
            "https://a.com/privacy",
            1,
            "privacy notice for the california consumer privacy act. notice at collection. \
             right to know. right to delete. do not sell my personal information here",
            vec![],
        );
        let base = crawl_of(vec![homepage, privacy], vec![(1, 14)]);
        let before = evaluate_registry(&registry, &base);

        let mut grown = base.clone();
        grown.snapshots.push(snapshot(
            "https://a.com/blog",
            1,
            "an unrelated blog post about kettles",
            vec![],
        ));
        grown.privacy_candidates.push((2, 3));
        let after = evaluate_registry(&registry, &grown);

        for (id, result) in &before {
            if result.status == CriterionStatus::Found {
                assert_eq!(
                    after[id].status,
                    CriterionStatus::Found,
                    "{id} flipped after adding a page"
                );
            }
        }
        assert!(
            before
                .values()
                .filter(|r| r.status == CriterionStatus::Found)
                .count()
                >= 6
        );
    }

    #[tokio::test]
    async fn bare_host_falls_back_to_http_when_https_cannot_connect() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("index.html"),
            "<p>our privacy policy lives here</p>",
        )
        .unwrap();
        let server = crate::fixture_server::serve(
            dir.path().to_path_buf(),
            "127.0.0.1:0".parse().unwrap(),
            vec![],
        )
        .await
        .unwrap();
        let config = default_config();
        let cfg = CrawlConfig {
            politeness_delay_ms: 5,
            per_fetch_timeout_ms: 5_000,
            ..config.crawl
        };
        // No scheme: https is tried first and cannot connect to the plain
        // HTTP fixture, so the checker retries over http.
        let bare = format!("{}/index.html", server.addr());
        let run = run_check(&bare, &cfg, &config.criteria, &[], None).await;
        assert_eq!(
            run.report.verdict,
            Verdict::CcpaNotFound,
            "{:?}",
            run.report.error
        );
        assert!(
            run.report.seed_url.starts_with("http://"),
            "fallback seed: {}",
            run.report.seed_url
        );
        assert_eq!(run.report.pages_fetched, 1);
        server.shutdown().await;
    }

    #[tokio::test]
    async fn invalid_url_produces_an_error_report() {
        let config = default_config();
        let run = run_check("not a url", &config.crawl, &config.criteria, &[], None).await;
        assert_eq!(run.report.verdict, Verdict::Error);
        let err = run.report.error.as_ref().unwrap();
        assert_eq!(err.kind, "INVALID_URL");
        assert!(run.report.results.is_empty());
        assert!(run.report.complaint_instructions.is_none());
    }

    #[test]
    fn excerpts_stay_within_two_hundred_chars() {
        let long = "x ".repeat(400) + "right to know" + &" y".repeat(400);
        let offset = find_phrase(&long, "right to know").unwrap();
        let excerpt = excerpt_around(&long, offset, "right to know".len());
        assert!(excerpt.chars().count() <= 200);
        assert!(excerpt.contains("right to know"));
    }
}
