//! Precision of retained result sets against ground-truth labels, and the
//! side-by-side comparison of the tag-weighted crawler with the link-only
//! baseline.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::baseline_crawl_with;
use crate::canonical::{canonicalize, CanonicalUrl};
use crate::corpus::{self, Corpus, CorpusError, GeneratorSpec};
use crate::engine::{crawl_with, CrawlConfig, RankedResults, TagWeighted, ValidationError, DEFAULT_MAX_PAGES};
use crate::fetcher::{Clock, FetchConfig, SystemClock, Transport};
use crate::frontier::FrontierLimits;
use crate::relevance::{Query, WeightConfig};

/// Ground truth: whether each URL is relevant to the query of its corpus.
pub type RelevanceLabels = BTreeMap<CanonicalUrl, bool>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no relevance label for {0}")]
    MissingLabel(CanonicalUrl),
    #[error("suite has no rows")]
    EmptySuite,
    #[error("suite file {path}: {reason}")]
    SuiteInvalid { path: PathBuf, reason: String },
    #[error("row {row}: {source}")]
    Crawl {
        row: String,
        #[source]
        source: ValidationError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Pdd,
    Baseline,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Pdd => "pdd",
            Arm::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionReport {
    pub query: String,
    pub arm: Arm,
    pub retained: usize,
    pub true_positives: usize,
    /// `true_positives / retained`, 0 when nothing was retained.
    pub precision: f64,
    /// Relevant results among the top 5, divided by 5.
    pub precision_at_5: f64,
    pub precision_at_10: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(
    results: &RankedResults,
    labels: &RelevanceLabels,
    query: &str,
    arm: Arm,
) -> Result<PrecisionReport, EvalError> {
    let mut hits = Vec::with_capacity(results.len());
    for e in &results.entries {
        match labels.get(&e.url) {
            Some(l) => hits.push(*l),
            None => return Err(EvalError::MissingLabel(e.url.clone())),
        }
    }
    let tp = hits.iter().filter(|h| **h).count();
    let at = |k: usize| ratio(hits.iter().take(k).filter(|h| **h).count(), k);
    Ok(PrecisionReport {
        query: query.to_string(),
        arm,
        retained: hits.len(),
        true_positives: tp,
        precision: ratio(tp, hits.len()),
        precision_at_5: at(5),
        precision_at_10: at(10),
    })
}

/// Crawl settings shared by every row of a comparison.
#[derive(Debug, Clone)]
pub struct CompareSettings {
    pub weights: WeightConfig,
    pub max_pages: usize,
    pub limits: FrontierLimits,
    pub workers: usize,
    pub fetch: FetchConfig,
    pub respect_meta_robots: bool,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            weights: WeightConfig::default(),
            max_pages: DEFAULT_MAX_PAGES,
            limits: FrontierLimits::default(),
            workers: 1,
            fetch: FetchConfig {
                min_delay: std::time::Duration::ZERO,
                ..FetchConfig::default()
            },
            respect_meta_robots: true,
        }
    }
}

impl CompareSettings {
    pub fn config(&self, seeds: Vec<CanonicalUrl>, query: Query) -> CrawlConfig {
        CrawlConfig {
            seeds,
            query,
            weights: self.weights,
            max_pages: self.max_pages,
            limits: self.limits,
            workers: self.workers,
            fetch: self.fetch.clone(),
            respect_meta_robots: self.respect_meta_robots,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub name: String,
    pub query: String,
    pub seeds: Vec<CanonicalUrl>,
    pub corpus: Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub query: String,
    pub baseline: PrecisionReport,
    pub pdd: PrecisionReport,
}

pub fn compare(rows: &[CompareRow], settings: &CompareSettings) -> Result<Vec<ComparisonRow>, EvalError> {
    compare_with(rows, settings, Arc::new(SystemClock::default()))
}

pub fn compare_with(
    rows: &[CompareRow],
    settings: &CompareSettings,
    clock: Arc<dyn Clock>,
) -> Result<Vec<ComparisonRow>, EvalError> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let crawl_err = |source| EvalError::Crawl {
            row: row.name.clone(),
            source,
        };
        let query = Query::phrase(&row.query).map_err(|_| crawl_err(ValidationError::EmptyQuery))?;
        let config = settings.config(row.seeds.clone(), query);
        let transport: Arc<dyn Transport> = Arc::new(row.corpus.transport());
        let labels = row.corpus.labels();

        let pdd = crawl_with(&config, transport.clone(), clock.clone(), &TagWeighted).map_err(crawl_err)?;
        let base = baseline_crawl_with(&config, transport, clock.clone()).map_err(crawl_err)?;
        out.push(ComparisonRow {
            name: row.name.clone(),
            query: row.query.clone(),
            baseline: precision(&base.results, &labels, &row.query, Arm::Baseline)?,
            pdd: precision(&pdd.results, &labels, &row.query, Arm::Pdd)?,
        });
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per (row, arm): `query,arm,retained,true_positives,precision`.
pub fn render_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("query,arm,retained,true_positives,precision\n");
    for row in rows {
        for r in [&row.baseline, &row.pdd] {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.4}",
                csv_field(&r.query),
                r.arm,
                r.retained,
                r.true_positives,
                r.precision
            );
        }
    }
    out
}

/// Plain-text table with one line per query and the two arms side by side.
pub fn render_report(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.query.len()).max().unwrap_or(0).max("Query".len());
    let mut out = String::new();
    let _ = writeln!(out, "Precision comparison (percent of retained pages labeled relevant)");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>17}",
        "Query", "Baseline", "PDD", "PDD p@5", "PDD p@10", "Retained (B/PDD)"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 2 + 9 * 4 + 2 * 4 + 17 + 2));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}%  {:>8.2}%  {:>8.2}%  {:>8.2}%  {:>17}",
            r.query,
            r.baseline.precision * 100.0,
            r.pdd.precision * 100.0,
            r.pdd.precision_at_5 * 100.0,
            r.pdd.precision_at_10 * 100.0,
            format!("{}/{}", r.baseline.retained, r.pdd.retained)
        );
    }
    out
}

/// A comparison suite as stored on disk (TOML). Corpus paths are relative
/// to the suite file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pages: Option<usize>,
    #[serde(default, rename = "row")]
    pub rows: Vec<SuiteRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteRow {
    pub name: String,
    pub query: String,
    pub corpus: PathBuf,
    pub seeds: Vec<String>,
    /// How the corpus was produced, if it was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

impl SuiteFile {
    pub fn read(path: &Path) -> Result<Self, EvalError> {
        let invalid = |reason: String| EvalError::SuiteInvalid {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
        let suite: SuiteFile = toml::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if suite.rows.is_empty() {
            return Err(EvalError::EmptySuite);
        }
        Ok(suite)
    }

    /// Loads every row's corpus and canonicalizes its seeds.
    pub fn load_rows(&self, suite_path: &Path) -> Result<Vec<CompareRow>, EvalError> {
        let base = suite_path.parent().unwrap_or(Path::new("."));
        self.rows
            .iter()
            .map(|row| {
                let seeds = row
                    .seeds
                    .iter()
                    .map(|s| canonicalize(s, None))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| EvalError::SuiteInvalid {
                        path: suite_path.to_path_buf(),
                        reason: format!("row {}: {e}", row.name),
                    })?;
                Ok(CompareRow {
                    name: row.name.clone(),
                    query: row.query.clone(),
                    seeds,
                    corpus: corpus::load(&base.join(&row.corpus))?,
                })
            })
            .collect()
    }
}
