//! Link-only comparison crawler.
//!
//! Traversal is identical to the tag-weighted crawl; only the retention rule
//! differs. A page is kept when the query occurs in its URL, and pages are
//! ranked by the number of such occurrences. Page content is never scored.

use std::sync::Arc;

use serde::Serialize;

use crate::canonical::CanonicalUrl;
use crate::engine::{crawl_with, CrawlConfig, CrawlOutput, Judge, ValidationError};
use crate::fetcher::{Clock, SystemClock, Transport};
use crate::html::TagDocument;
use crate::relevance::{OccurrenceCounts, PageScore, Query, WeightConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaselineScore {
    pub url: CanonicalUrl,
    pub anchor_hits: u64,
    pub relevant: bool,
}

impl BaselineScore {
    pub fn of(url: &CanonicalUrl, query: &Query) -> Self {
        let anchor_hits = query.count_in(url.as_str());
        Self {
            url: url.clone(),
            anchor_hits,
            relevant: anchor_hits > 0,
        }
    }
}

impl From<BaselineScore> for PageScore {
    fn from(b: BaselineScore) -> Self {
        PageScore {
            url: b.url,
            counts: OccurrenceCounts {
                url: b.anchor_hits,
                ..OccurrenceCounts::default()
            },
            total_weight: b.anchor_hits,
            relevant: b.relevant,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UrlOnly;

impl Judge for UrlOnly {
    fn judge(&self, _doc: &TagDocument, url: &CanonicalUrl, query: &Query, _w: &WeightConfig) -> PageScore {
        BaselineScore::of(url, query).into()
    }
}

pub fn baseline_crawl(config: &CrawlConfig, transport: Arc<dyn Transport>) -> Result<CrawlOutput, ValidationError> {
    baseline_crawl_with(config, transport, Arc::new(SystemClock::default()))
}

pub fn baseline_crawl_with(
    config: &CrawlConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
) -> Result<CrawlOutput, ValidationError> {
    crawl_with(config, transport, clock, &UrlOnly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::canonicalize;
    use crate::corpus::Corpus;
    use crate::engine::{crawl, validate_inputs};
    use std::collections::BTreeSet;
    use std::time::Duration;

    fn url(s: &str) -> CanonicalUrl {
        canonicalize(s, None).unwrap()
    }

    #[test]
    fn url_substring_rule() {
        let q = Query::phrase("book show").unwrap();
        assert!(!BaselineScore::of(&url("http://s.test/book-show/1"), &q).relevant);
        let q = Query::phrase("html").unwrap();
        let s = BaselineScore::of(&url("http://www.myblogindia.com/html/default.asp"), &q);
        assert_eq!(s.anchor_hits, 1);
        assert!(s.relevant);
        let q = Query::phrase("HTML").unwrap();
        assert!(BaselineScore::of(&url("http://x.test/Html/HTML"), &q).anchor_hits >= 1);
    }

    #[test]
    fn body_only_pages_are_invisible_to_baseline() {
        let corpus = Corpus::builder()
            .page(
                "http://b.test/",
                "<html><body>falcon falcon falcon falcon <a href=\"/p\">p</a></body></html>",
            )
            .page("http://b.test/p", "<html><body>falcon falcon falcon falcon falcon</body></html>")
            .build();
        let mut cfg = validate_inputs(&["http://b.test/"], "falcon").unwrap();
        cfg.fetch.min_delay = Duration::ZERO;
        let t: Arc<dyn Transport> = Arc::new(corpus.transport());
        let base = baseline_crawl(&cfg, t.clone()).unwrap();
        let pdd = crawl(&cfg, t).unwrap();
        assert!(base.results.is_empty());
        assert_eq!(pdd.results.len(), 2);
        let visited = |o: &CrawlOutput| o.records.iter().map(|r| r.url.clone()).collect::<BTreeSet<_>>();
        assert_eq!(visited(&base), visited(&pdd));
    }
}
