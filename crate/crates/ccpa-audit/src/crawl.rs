//! Bounded breadth-first crawl from the seed plus privacy-page discovery.
//!
//! The crawl is level-synchronized: candidates for the next depth are
//! gathered from every page of the current depth, ordered by descending
//! privacy score with lexicographic URL tie-breaking, and fetched in that
//! order. Results are assembled in candidate order regardless of fetch
//! completion order, so the snapshot sequence is deterministic for a given
//! site and configuration.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use tokio::task::JoinSet;
use tokio::time::Instant;

use crate::extract::extract_page;
use crate::fetch::{normalize_url, FetchError, FetchErrorKind, FetchOutcome, Fetcher};
use crate::model::{registrable_domain, CrawlConfig, PageSnapshot, SiteProfile};

/// Score assigned to a profile-hinted privacy page; above anything the
/// anchor scoring table can produce, so hinted pages rank first.
pub const PROFILE_HINT_SCORE: i64 = 100;

#[derive(Debug, Clone)]
pub struct CrawlResult {
    pub snapshots: Vec<PageSnapshot>,
    /// Index of the depth-0 snapshot.
    pub homepage: usize,
    /// (snapshot index, score) ranked by descending score, then URL.
    pub privacy_candidates: Vec<(usize, i64)>,
    /// True when max_pages, max_depth, or the deadline cut off known work.
    pub budget_exhausted: bool,
    pub errors: Vec<FetchError>,
}

impl CrawlResult {
    pub fn homepage_snapshot(&self) -> &PageSnapshot {
        &self.snapshots[self.homepage]
    }
}

/// Deterministic privacy-link score, additive over the rules below.
pub fn score_privacy_anchor(anchor_text: &str, url: &str) -> i64 {
    let anchor = anchor_text.to_lowercase();
    let path = url::Url::parse(url)
        .map(|u| u.path().to_lowercase())
        .unwrap_or_else(|_| url.to_lowercase());
    let mut score = 0;
    if anchor.contains("privacy") {
        score += 8;
    }
    if path.contains("privacy") {
        score += 6;
    }
    if anchor.contains("ccpa") || anchor.contains("california") {
        score += 10;
    }
    if anchor.contains("do not sell") {
        score += 10;
    }
    if path.contains("legal") || path.contains("policies") {
        score += 2;
    }
    score
}

fn domain_of(url: &str) -> Option<String> {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(registrable_domain))
}

fn finish_snapshot(snapshot: &mut PageSnapshot, depth: u32) {
    let extracted = extract_page(&snapshot.body, &snapshot.content_type, &snapshot.final_url);
    snapshot.text = extracted.text;
    snapshot.links = extracted.links;
    snapshot.phone_numbers = extracted.phone_numbers;
    snapshot.depth = depth;
}

struct Crawl {
    snapshots: Vec<PageSnapshot>,
    /// Best anchor score seen for each snapshot, parallel to `snapshots`.
    best_score: Vec<i64>,
    page_index: HashMap<String, usize>,
    visited: HashSet<String>,
    errors: Vec<FetchError>,
    budget_exhausted: bool,
}

impl Crawl {
    fn admit(&mut self, mut snapshot: PageSnapshot, depth: u32, score: i64, requested: &str) {
        finish_snapshot(&mut snapshot, depth);
        let idx = self.snapshots.len();
        self.visited.insert(requested.to_string());
        self.visited.insert(snapshot.final_url.clone());
        self.page_index.insert(requested.to_string(), idx);
        self.page_index.insert(snapshot.final_url.clone(), idx);
        self.best_score.push(score);
        self.snapshots.push(snapshot);
    }

    fn upgrade_score(&mut self, url: &str, score: i64) {
        if let Some(&idx) = self.page_index.get(url) {
            if score > self.best_score[idx] {
                self.best_score[idx] = score;
            }
        }
    }
}

/// Crawl from `seed` within the configured budget. The homepage is fetched
/// first and its failure aborts the crawl; later failures are recorded in
/// `errors` and skipped.
pub async fn crawl_site(
    fetcher: Arc<Fetcher>,
    seed: &str,
    cfg: &CrawlConfig,
    profile: Option<&SiteProfile>,
    deadline: Instant,
) -> Result<CrawlResult, FetchError> {
    let seed = normalize_url(seed)?;
    let seed_domain = domain_of(&seed);
    let per_fetch = Duration::from_millis(cfg.per_fetch_timeout_ms);

    let mut crawl = Crawl {
        snapshots: Vec::new(),
        best_score: Vec::new(),
        page_index: HashMap::new(),
        visited: HashSet::new(),
        errors: Vec::new(),
        budget_exhausted: false,
    };

    let remaining = time_left(deadline).ok_or_else(|| deadline_error(&seed))?;
    let homepage = fetcher
        .polite_fetch_with_timeout(&seed, cfg, per_fetch.min(remaining))
        .await?;
    crawl.admit(homepage, 0, 0, &seed);

    // A profile-hinted privacy page jumps the queue. It is operator-directed,
    // so robots.txt is not consulted for it.
    if let Some(hint) = profile.and_then(|p| p.privacy_page_url.as_deref()) {
        match normalize_url(hint) {
            Ok(hint_url) => {
                let in_scope = !cfg.same_site_only || domain_of(&hint_url) == seed_domain;
                if in_scope && !crawl.visited.contains(&hint_url) {
                    if crawl.snapshots.len() >= cfg.max_pages {
                        crawl.budget_exhausted = true;
                    } else if let Some(remaining) = time_left(deadline) {
                        match fetcher
                            .polite_fetch_with_timeout(&hint_url, cfg, per_fetch.min(remaining))
                            .await
                        {
                            Ok(snapshot) => {
                                if !crawl.visited.contains(&snapshot.final_url) {
                                    crawl.admit(snapshot, 1, PROFILE_HINT_SCORE, &hint_url);
                                } else {
                                    crawl.upgrade_score(&snapshot.final_url, PROFILE_HINT_SCORE);
                                    crawl.visited.insert(hint_url);
                                }
                            }
                            Err(e) => {
                                crawl.visited.insert(hint_url);
                                crawl.errors.push(e);
                            }
                        }
                    } else {
                        crawl.budget_exhausted = true;
                    }
                }
            }
            Err(e) => crawl.errors.push(e),
        }
    }

    let mut depth: u32 = 0;
    'levels: loop {
        // Candidates for depth + 1, merged by max anchor score.
        let mut level: BTreeMap<String, i64> = BTreeMap::new();
        let mut add_candidate = |crawl: &mut Crawl, url: &str, score: i64| {
            if cfg.same_site_only && domain_of(url) != seed_domain {
                return;
            }
            if crawl.page_index.contains_key(url) {
                crawl.upgrade_score(url, score);
                return;
            }
            if crawl.visited.contains(url) {
                return;
            }
            level
                .entry(url.to_string())
                .and_modify(|s| *s = (*s).max(score))
                .or_insert(score);
        };
        let links: Vec<(String, String)> = crawl
            .snapshots
            .iter()
            .filter(|s| s.depth == depth)
            .flat_map(|s| {
                s.links
                    .iter()
                    .map(|l| (l.url.clone(), l.anchor_text.clone()))
            })
            .collect();
        for (url, anchor) in links {
            let score = score_privacy_anchor(&anchor, &url);
            add_candidate(&mut crawl, &url, score);
        }
        if depth == 0 {
            for extra in profile.map(|p| p.extra_seeds.as_slice()).unwrap_or(&[]) {
                if let Ok(url) = normalize_url(extra) {
                    let score = score_privacy_anchor("", &url);
                    add_candidate(&mut crawl, &url, score);
                }
            }
        }

        if level.is_empty() {
            break;
        }
        if depth + 1 > cfg.max_depth || crawl.snapshots.len() >= cfg.max_pages {
            crawl.budget_exhausted = true;
            break;
        }

        let mut queue: VecDeque<(String, i64)> = {
            let mut ordered: Vec<(String, i64)> = level.into_iter().collect();
            ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ordered.into()
        };

        while !queue.is_empty() {
            if crawl.snapshots.len() >= cfg.max_pages {
                crawl.budget_exhausted = true;
                break 'levels;
            }
            let Some(remaining) = time_left(deadline) else {
                crawl.budget_exhausted = true;
                break 'levels;
            };
            let batch_budget = cfg
                .parallelism
                .min(cfg.max_pages - crawl.snapshots.len())
                .min(queue.len());
            let mut batch: Vec<(String, i64)> = Vec::with_capacity(batch_budget);
            while batch.len() < batch_budget {
                let Some((url, score)) = queue.pop_front() else {
                    break;
                };
                if crawl.visited.contains(&url) {
                    continue;
                }
                if !fetcher.robots_allowed(&url, cfg).await {
                    crawl.visited.insert(url);
                    continue;
                }
                crawl.visited.insert(url.clone());
                batch.push((url, score));
            }
            if batch.is_empty() {
                continue;
            }

            let mut set: JoinSet<(usize, FetchOutcome)> = JoinSet::new();
            for (pos, (url, _)) in batch.iter().enumerate() {
                let fetcher = Arc::clone(&fetcher);
                let url = url.clone();
                let cfg = cfg.clone();
                let timeout = per_fetch.min(remaining);
                set.spawn(async move {
                    (
                        pos,
                        fetcher.polite_fetch_with_timeout(&url, &cfg, timeout).await,
                    )
                });
            }
            let mut outcomes: Vec<Option<FetchOutcome>> = (0..batch.len()).map(|_| None).collect();
            while let Some(joined) = set.join_next().await {
                if let Ok((pos, outcome)) = joined {
                    outcomes[pos] = Some(outcome);
                }
            }

            // Deterministic assembly in candidate order.
            for (pos, outcome) in outcomes.into_iter().enumerate() {
                let (url, score) = &batch[pos];
                match outcome {
                    Some(Ok(snapshot)) => {
                        if crawl.visited.contains(&snapshot.final_url) && snapshot.final_url != *url
                        {
                            crawl.upgrade_score(&snapshot.final_url, *score);
                            continue;
                        }
                        crawl.admit(snapshot, depth + 1, *score, url);
                    }
                    Some(Err(e)) => crawl.errors.push(e),
                    None => crawl.errors.push(FetchError::new(
                        FetchErrorKind::ConnectFailure,
                        "fetch task failed",
                        url.clone(),
                    )),
                }
            }
        }
        depth += 1;
    }

    let mut privacy_candidates: Vec<(usize, i64)> = crawl
        .best_score
        .iter()
        .enumerate()
        .filter(|(_, &score)| score > 0)
        .map(|(idx, &score)| (idx, score))
        .collect();
    privacy_candidates.sort_by(|a, b| {
        b.1.cmp(&a.1).then_with(|| {
            crawl.snapshots[a.0]
                .final_url
                .cmp(&crawl.snapshots[b.0].final_url)
        })
    });

    Ok(CrawlResult {
        snapshots: crawl.snapshots,
        homepage: 0,
        privacy_candidates,
        budget_exhausted: crawl.budget_exhausted,
        errors: crawl.errors,
    })
}

fn time_left(deadline: Instant) -> Option<Duration> {
    let now = Instant::now();
    if now >= deadline {
        None
    } else {
        Some(deadline - now)
    }
}

fn deadline_error(url: &str) -> FetchError {
    FetchError::new(
        FetchErrorKind::Timeout,
        "total deadline elapsed before the homepage was fetched",
        url,
    )
}
