//! Crawl loop: dequeue, fetch, parse, score, keep or discard, extract links,
//! enqueue, until the frontier drains or the page budget is spent.
//!
//! Relevance only decides retention. Links are followed from every HTML
//! page that does not carry `nofollow`, so two crawls with different judges
//! over the same configuration traverse the same URLs.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::canonical::{canonicalize, CanonicalUrl};
use crate::fetcher::{Clock, FetchConfig, FetchStatus, Fetcher, SystemClock, Transport};
use crate::frontier::{Frontier, FrontierEntry, FrontierLimits, RejectionCounts};
use crate::html::{self, HtmlError, RobotsDirective, TagDocument};
use crate::relevance::{score, OccurrenceCounts, PageScore, Query, ScoreError, WeightConfig};

pub const DEFAULT_MAX_PAGES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("no valid seed URL")]
    NoValidSeeds,
    #[error("query is empty")]
    EmptyQuery,
    #[error("{0} must be at least 1")]
    ZeroLimit(&'static str),
}

#[derive(Debug, Clone)]
pub struct CrawlConfig {
    pub seeds: Vec<CanonicalUrl>,
    pub query: Query,
    pub weights: WeightConfig,
    /// Upper bound on dequeued URLs, i.e. fetch attempts.
    pub max_pages: usize,
    pub limits: FrontierLimits,
    pub workers: usize,
    pub fetch: FetchConfig,
    pub respect_meta_robots: bool,
}

impl CrawlConfig {
    pub fn new(seeds: Vec<CanonicalUrl>, query: Query) -> Self {
        Self {
            seeds,
            query,
            weights: WeightConfig::default(),
            max_pages: DEFAULT_MAX_PAGES,
            limits: FrontierLimits::default(),
            workers: 1,
            fetch: FetchConfig::default(),
            respect_meta_robots: true,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.seeds.is_empty() {
            return Err(ValidationError::NoValidSeeds);
        }
        if self.max_pages == 0 {
            return Err(ValidationError::ZeroLimit("max_pages"));
        }
        if self.workers == 0 {
            return Err(ValidationError::ZeroLimit("workers"));
        }
        Ok(())
    }
}

/// Canonicalizes the seeds (dropping the ones that do not parse) and
/// normalizes the query into a phrase.
pub fn validate_inputs<S: AsRef<str>>(seeds: &[S], query: &str) -> Result<CrawlConfig, ValidationError> {
    let mut valid = Vec::new();
    for raw in seeds {
        match canonicalize(raw.as_ref().trim(), None) {
            Ok(url) if !valid.contains(&url) => valid.push(url),
            Ok(_) => {}
            Err(e) => tracing::warn!(seed = raw.as_ref(), error = %e, "skipping invalid seed"),
        }
    }
    if valid.is_empty() {
        return Err(ValidationError::NoValidSeeds);
    }
    let query = Query::phrase(query).map_err(|ScoreError::EmptyQuery| ValidationError::EmptyQuery)?;
    Ok(CrawlConfig::new(valid, query))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    BelowThreshold,
    NoIndex,
    FetchFailed,
    NotHtml,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrawlRecord {
    /// Position in dequeue order, starting at 0.
    pub seq: usize,
    pub url: CanonicalUrl,
    pub final_url: CanonicalUrl,
    pub depth: u32,
    pub status: FetchStatus,
    pub bytes: usize,
    pub score: Option<PageScore>,
    /// `None` means the page was retained.
    pub discarded: Option<DiscardReason>,
    pub links_enqueued: usize,
}

impl CrawlRecord {
    pub fn is_retained(&self) -> bool {
        self.discarded.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedEntry {
    pub url: CanonicalUrl,
    pub t: u64,
    pub counts: OccurrenceCounts,
}

/// Retained pages sorted by `t` descending, ties in dequeue order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RankedResults {
    pub entries: Vec<RankedEntry>,
}

impl RankedResults {
    /// Builds the ranking from crawl records. A page reached under several
    /// URLs through redirects is kept once, at its earliest dequeue.
    pub fn from_records(records: &[CrawlRecord]) -> Self {
        let mut retained: Vec<&CrawlRecord> = records.iter().filter(|r| r.is_retained()).collect();
        retained.sort_by_key(|r| r.seq);
        let mut seen = HashSet::new();
        let mut rows: Vec<(u64, usize, RankedEntry)> = Vec::new();
        for r in retained {
            let Some(s) = &r.score else { continue };
            if !seen.insert(s.url.clone()) {
                continue;
            }
            rows.push((
                s.total_weight,
                r.seq,
                RankedEntry {
                    url: s.url.clone(),
                    t: s.total_weight,
                    counts: s.counts,
                },
            ));
        }
        rows.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        Self {
            entries: rows.into_iter().map(|(_, _, e)| e).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CrawlStats {
    pub dequeued: u64,
    pub fetched: u64,
    pub retained: u64,
    pub below_threshold: u64,
    pub no_index: u64,
    pub fetch_failed: u64,
    pub not_html: u64,
    pub bytes: u64,
    pub links_enqueued: u64,
    pub links_dropped: u64,
    pub rejected: RejectionCounts,
    pub per_host: BTreeMap<String, u64>,
    pub depth_histogram: BTreeMap<u32, u64>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Aggregates records by disposition, host and depth. Frontier counters
/// and timings are left at zero.
pub fn stats(records: &[CrawlRecord]) -> CrawlStats {
    let mut s = CrawlStats::default();
    for r in records {
        s.dequeued += 1;
        if r.status.is_ok() {
            s.fetched += 1;
        }
        match r.discarded {
            None => s.retained += 1,
            Some(DiscardReason::BelowThreshold) => s.below_threshold += 1,
            Some(DiscardReason::NoIndex) => s.no_index += 1,
            Some(DiscardReason::FetchFailed) => s.fetch_failed += 1,
            Some(DiscardReason::NotHtml) => s.not_html += 1,
        }
        s.bytes += r.bytes as u64;
        s.links_enqueued += r.links_enqueued as u64;
        *s.per_host.entry(r.url.host().to_string()).or_default() += 1;
        *s.depth_histogram.entry(r.depth).or_default() += 1;
    }
    s
}

#[derive(Debug, Clone)]
pub struct CrawlOutput {
    pub results: RankedResults,
    /// One record per dequeued URL, in dequeue order.
    pub records: Vec<CrawlRecord>,
    pub stats: CrawlStats,
}

/// Decides the score and relevance of a parsed page.
pub trait Judge: Sync {
    fn judge(&self, doc: &TagDocument, url: &CanonicalUrl, query: &Query, weights: &WeightConfig) -> PageScore;
}

/// The tag-weighted scorer.
#[derive(Debug, Clone, Copy, Default)]
pub struct TagWeighted;

impl Judge for TagWeighted {
    fn judge(&self, doc: &TagDocument, url: &CanonicalUrl, query: &Query, weights: &WeightConfig) -> PageScore {
        score(doc, url, query, weights)
    }
}

pub fn crawl(config: &CrawlConfig, transport: Arc<dyn Transport>) -> Result<CrawlOutput, ValidationError> {
    crawl_with(config, transport, Arc::new(SystemClock::default()), &TagWeighted)
}

struct Schedule {
    dispatched: usize,
    in_flight: usize,
}

struct Shared<'a> {
    config: &'a CrawlConfig,
    judge: &'a dyn Judge,
    fetcher: Fetcher,
    frontier: Frontier,
    schedule: Mutex<Schedule>,
    wake: Condvar,
    records: Mutex<Vec<CrawlRecord>>,
    links_dropped: Mutex<u64>,
}

pub fn crawl_with(
    config: &CrawlConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    judge: &dyn Judge,
) -> Result<CrawlOutput, ValidationError> {
    config.validate()?;
    let started = Instant::now();
    let shared = Shared {
        config,
        judge,
        fetcher: Fetcher::with_clock(transport, config.fetch.clone(), clock),
        frontier: Frontier::new(config.limits),
        schedule: Mutex::new(Schedule {
            dispatched: 0,
            in_flight: 0,
        }),
        wake: Condvar::new(),
        records: Mutex::new(Vec::new()),
        links_dropped: Mutex::new(0),
    };
    for seed in &config.seeds {
        shared.frontier.enqueue(FrontierEntry::seed(seed.clone()));
    }

    std::thread::scope(|scope| {
        for _ in 0..config.workers {
            scope.spawn(|| worker(&shared));
        }
    });

    let mut records = shared.records.into_inner().expect("records poisoned");
    records.sort_by_key(|r| r.seq);
    let results = RankedResults::from_records(&records);
    let mut stats = stats(&records);
    stats.rejected = shared.frontier.rejections();
    stats.links_dropped = shared.links_dropped.into_inner().expect("counter poisoned");
    stats.elapsed = started.elapsed();
    tracing::info!(
        dequeued = stats.dequeued,
        retained = stats.retained,
        elapsed_ms = stats.elapsed.as_millis() as u64,
        "crawl finished"
    );
    Ok(CrawlOutput {
        results,
        records,
        stats,
    })
}

fn next_job(shared: &Shared<'_>) -> Option<(usize, FrontierEntry)> {
    let mut sched = shared.schedule.lock().expect("schedule poisoned");
    loop {
        if sched.dispatched >= shared.config.max_pages {
            return None;
        }
        if let Some(entry) = shared.frontier.dequeue() {
            let seq = sched.dispatched;
            sched.dispatched += 1;
            sched.in_flight += 1;
            return Some((seq, entry));
        }
        if sched.in_flight == 0 {
            return None;
        }
        sched = shared.wake.wait(sched).expect("schedule poisoned");
    }
}

fn worker(shared: &Shared<'_>) {
    while let Some((seq, entry)) = next_job(shared) {
        let record = process(shared, seq, &entry);
        shared.records.lock().expect("records poisoned").push(record);
        let mut sched = shared.schedule.lock().expect("schedule poisoned");
        sched.in_flight -= 1;
        shared.wake.notify_all();
    }
    // Let waiting workers re-check the stop conditions.
    shared.wake.notify_all();
}

fn process(shared: &Shared<'_>, seq: usize, entry: &FrontierEntry) -> CrawlRecord {
    let config = shared.config;
    let fetched = shared.fetcher.fetch(&entry.url);
    let mut record = CrawlRecord {
        seq,
        url: entry.url.clone(),
        final_url: fetched.final_url.clone(),
        depth: entry.depth,
        status: fetched.status.clone(),
        bytes: fetched.body.as_ref().map_or(0, Vec::len),
        score: None,
        discarded: Some(DiscardReason::FetchFailed),
        links_enqueued: 0,
    };
    if fetched.final_url != entry.url {
        shared.frontier.mark_seen(&fetched.final_url);
    }
    let Some(body) = fetched.body.as_deref() else {
        tracing::debug!(url = %entry.url, status = ?fetched.status, "fetch failed");
        return record;
    };
    let doc = match html::parse_response(body, fetched.content_type.as_deref(), &fetched.final_url) {
        Ok(doc) => doc,
        Err(HtmlError::NotHtml(why)) => {
            tracing::debug!(url = %entry.url, why, "not html");
            record.discarded = Some(DiscardReason::NotHtml);
            return record;
        }
    };

    let page = shared
        .judge
        .judge(&doc, &fetched.final_url, &config.query, &config.weights);
    record.discarded = if !page.relevant {
        Some(DiscardReason::BelowThreshold)
    } else if config.respect_meta_robots && doc.has(RobotsDirective::NoIndex) {
        Some(DiscardReason::NoIndex)
    } else {
        None
    };
    record.score = Some(page);

    if !(config.respect_meta_robots && doc.has(RobotsDirective::NoFollow)) {
        let extracted = html::extract_links(&doc, &fetched.final_url);
        *shared.links_dropped.lock().expect("counter poisoned") += extracted.dropped as u64;
        let parent = FrontierEntry {
            url: fetched.final_url.clone(),
            depth: entry.depth,
            parent: entry.parent.clone(),
        };
        for link in extracted.links {
            if shared.frontier.enqueue(FrontierEntry::child_of(&parent, link)).is_admitted() {
                record.links_enqueued += 1;
            }
        }
    }
    record
}
