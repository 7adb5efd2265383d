//! Tag-weighted relevance scoring.
//!
//! A page's weight is the sum over the five regions of
//! `occurrences(region) * weight(region)`, and a page is relevant when that
//! weight is strictly greater than the threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::CanonicalUrl;
use crate::html::TagDocument;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("query is empty")]
    EmptyQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub meta: u32,
    pub url: u32,
    pub title: u32,
    pub heading: u32,
    pub body: u32,
    pub threshold: u64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            meta: 5,
            url: 4,
            title: 3,
            heading: 2,
            body: 1,
            threshold: 3,
        }
    }
}

impl WeightConfig {
    /// Multiplies every weight and the threshold by `factor`.
    pub fn scaled(&self, factor: u32) -> Self {
        Self {
            meta: self.meta * factor,
            url: self.url * factor,
            title: self.title * factor,
            heading: self.heading * factor,
            body: self.body * factor,
            threshold: self.threshold * u64::from(factor),
        }
    }
}

/// Per-region occurrence counts of the query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct OccurrenceCounts {
    pub meta: u64,
    pub url: u64,
    pub title: u64,
    pub heading: u64,
    pub body: u64,
}

impl OccurrenceCounts {
    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            meta: self.meta * factor,
            url: self.url * factor,
            title: self.title * factor,
            heading: self.heading * factor,
            body: self.body * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageScore {
    pub url: CanonicalUrl,
    pub counts: OccurrenceCounts,
    pub total_weight: u64,
    pub relevant: bool,
}

impl PageScore {
    pub fn new(url: CanonicalUrl, counts: OccurrenceCounts, weights: &WeightConfig) -> Self {
        let total_weight = page_weight(&counts, weights);
        Self {
            url,
            counts,
            total_weight,
            relevant: is_relevant(total_weight, weights),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// The whole query as one whitespace-normalized phrase.
    #[default]
    Phrase,
    /// Each whitespace-separated term counted separately, counts summed.
    AnyTerm,
}

/// A validated, case-folded query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    text: String,
    mode: MatchMode,
    patterns: Vec<String>,
}

impl Query {
    pub fn new(raw: &str, mode: MatchMode) -> Result<Self, ScoreError> {
        let text = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return Err(ScoreError::EmptyQuery);
        }
        let patterns = match mode {
            MatchMode::Phrase => vec![fold_case(&text)],
            MatchMode::AnyTerm => text.split(' ').map(fold_case).collect(),
        };
        Ok(Self {
            text,
            mode,
            patterns,
        })
    }

    pub fn phrase(raw: &str) -> Result<Self, ScoreError> {
        Self::new(raw, MatchMode::Phrase)
    }

    /// The whitespace-normalized query as entered.
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    /// Non-overlapping, case-insensitive occurrences in `text`.
    pub fn count_in(&self, text: &str) -> u64 {
        let folded = fold_case(text);
        self.patterns
            .iter()
            .map(|p| folded.matches(p.as_str()).count() as u64)
            .sum()
    }

    pub fn count_in_all<'a>(&self, texts: impl IntoIterator<Item = &'a String>) -> u64 {
        texts.into_iter().map(|t| self.count_in(t)).sum()
    }
}

/// Simple per-character case folding: a character whose lowercase mapping
/// is a single character maps to it, others are kept.
pub fn fold_case(s: &str) -> String {
    s.chars()
        .map(|c| {
            let mut lower = c.to_lowercase();
            match (lower.next(), lower.next()) {
                (Some(l), None) => l,
                _ => c,
            }
        })
        .collect()
}

pub fn count_occurrences(doc: &TagDocument, query: &str) -> Result<OccurrenceCounts, ScoreError> {
    Ok(count_with(doc, &Query::phrase(query)?))
}

pub fn count_with(doc: &TagDocument, query: &Query) -> OccurrenceCounts {
    OccurrenceCounts {
        meta: query.count_in_all(&doc.meta_texts),
        url: query.count_in(&doc.url_text),
        title: query.count_in(&doc.title_text),
        heading: query.count_in_all(&doc.heading_texts),
        body: query.count_in(&doc.body_text),
    }
}

pub fn page_weight(counts: &OccurrenceCounts, w: &WeightConfig) -> u64 {
    counts.body * u64::from(w.body)
        + counts.title * u64::from(w.title)
        + counts.meta * u64::from(w.meta)
        + counts.heading * u64::from(w.heading)
        + counts.url * u64::from(w.url)
}

pub fn is_relevant(total_weight: u64, w: &WeightConfig) -> bool {
    total_weight > w.threshold
}

pub fn score(doc: &TagDocument, url: &CanonicalUrl, query: &Query, w: &WeightConfig) -> PageScore {
    PageScore::new(url.clone(), count_with(doc, query), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(body: u64, title: u64, meta: u64, heading: u64, url: u64) -> OccurrenceCounts {
        OccurrenceCounts {
            meta,
            url,
            title,
            heading,
            body,
        }
    }

    fn example_doc() -> TagDocument {
        TagDocument {
            url_text: "http://www.myblogindia.com/html/default.asp".into(),
            meta_texts: vec![
                "Free HTML Web tutorials".into(),
                "HTML, CSS, XML".into(),
                "RGCER".into(),
            ],
            title_text: "HTML title of page".into(),
            heading_texts: vec![],
            body_text: "This is my very own HTML page. This page is just for reference.".into(),
            ..Default::default()
        }
    }

    /// Slides one character at a time; on a match, jumps past it.
    fn naive_count(text: &str, pattern: &str) -> u64 {
        let t: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
        let p: Vec<char> = pattern.chars().flat_map(char::to_lowercase).collect();
        if p.is_empty() {
            return 0;
        }
        let (mut i, mut n) = (0, 0);
        while i + p.len() <= t.len() {
            if t[i..i + p.len()] == p[..] {
                n += 1;
                i += p.len();
            } else {
                i += 1;
            }
        }
        n
    }

    #[test]
    fn example_page_counts_and_weight() {
        let c = count_occurrences(&example_doc(), "html").unwrap();
        assert_eq!(c, counts(1, 1, 2, 0, 1));
        assert_eq!(page_weight(&c, &WeightConfig::default()), 18);
    }

    #[test]
    fn absent_query_counts_zero() {
        let c = count_occurrences(&example_doc(), "cricket").unwrap();
        assert_eq!(c, OccurrenceCounts::default());
    }

    #[test]
    fn counting_is_non_overlapping() {
        let q = Query::phrase("aa").unwrap();
        assert_eq!(q.count_in("aaaa"), naive_count("aaaa", "aa"));
        assert_eq!(q.count_in("aaaa"), 2);
        assert_eq!(q.count_in("aaa"), 1);
    }

    #[test]
    fn empty_query_is_rejected() {
        assert_eq!(count_occurrences(&example_doc(), "  \t"), Err(ScoreError::EmptyQuery));
        assert_eq!(Query::phrase(""), Err(ScoreError::EmptyQuery));
    }

    #[test]
    fn phrase_is_whitespace_normalized() {
        let q = Query::phrase("  Book \n  show ").unwrap();
        assert_eq!(q.as_str(), "Book show");
        assert_eq!(q.count_in("book show, BOOK SHOW, bookshow, book  show"), 2);
    }

    #[test]
    fn any_term_mode_sums_terms() {
        let q = Query::new("book show", MatchMode::AnyTerm).unwrap();
        assert_eq!(q.count_in("book a show; books"), 3);
    }

    #[test]
    fn weight_examples() {
        let w = WeightConfig::default();
        assert_eq!(page_weight(&OccurrenceCounts::default(), &w), 0);
        assert_eq!(page_weight(&counts(0, 0, 0, 2, 0), &w), 4);
    }

    #[test]
    fn threshold_is_strict() {
        let w = WeightConfig::default();
        assert!(is_relevant(18, &w));
        assert!(!is_relevant(3, &w));
        assert!(is_relevant(4, &w));
        assert!(!is_relevant(0, &w));
    }

    #[test]
    fn meta_outweighs_any_other_single_region() {
        let w = WeightConfig::default();
        let meta = page_weight(&counts(0, 0, 1, 0, 0), &w);
        for other in [counts(1, 0, 0, 0, 0), counts(0, 1, 0, 0, 0), counts(0, 0, 0, 1, 0), counts(0, 0, 0, 0, 1)] {
            assert!(meta > page_weight(&other, &w));
        }
    }

    #[test]
    fn simple_case_folding() {
        assert_eq!(fold_case("HTML Ünïcode"), "html ünïcode");
        // Multi-char lowercase mappings are left alone.
        assert_eq!(fold_case("İ"), "İ");
    }

    fn arb_counts() -> impl Strategy<Value = OccurrenceCounts> {
        (0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000)
            .prop_map(|(b, t, m, h, u)| counts(b, t, m, h, u))
    }

    fn arb_weights() -> impl Strategy<Value = WeightConfig> {
        (0u32..50, 0u32..50, 0u32..50, 0u32..50, 0u32..50, 0u64..100).prop_map(
            |(meta, url, title, heading, body, threshold)| WeightConfig {
                meta,
                url,
                title,
                heading,
                body,
                threshold,
            },
        )
    }

    proptest! {
        #[test]
        fn weight_is_linear(c in arb_counts(), w in arb_weights()) {
            prop_assert_eq!(page_weight(&c.scaled(2), &w), 2 * page_weight(&c, &w));
        }

        #[test]
        fn weight_is_monotone(c in arb_counts(), w in arb_weights(), region in 0usize..5) {
            let mut bigger = c;
            match region {
                0 => bigger.meta += 1,
                1 => bigger.url += 1,
                2 => bigger.title += 1,
                3 => bigger.heading += 1,
                _ => bigger.body += 1,
            }
            let (before, after) = (page_weight(&c, &w), page_weight(&bigger, &w));
            prop_assert!(after >= before);
            let all_positive = w.meta > 0 && w.url > 0 && w.title > 0 && w.heading > 0 && w.body > 0;
            if all_positive {
                prop_assert!(after > before);
            }
        }

        #[test]
        fn scaling_weights_preserves_order_and_relevance(
            a in arb_counts(), b in arb_counts(), w in arb_weights(), k in 1u32..20,
        ) {
            let ws = w.scaled(k);
            prop_assert_eq!(
                page_weight(&a, &w).cmp(&page_weight(&b, &w)),
                page_weight(&a, &ws).cmp(&page_weight(&b, &ws))
            );
            prop_assert_eq!(
                is_relevant(page_weight(&a, &w), &w),
                is_relevant(page_weight(&a, &ws), &ws)
            );
        }

        #[test]
        fn matches_naive_counter(text in "[abAB ]{0,60}", pat in "[abAB]{1,4}") {
            let q = Query::phrase(&pat).unwrap();
            prop_assert_eq!(q.count_in(&text), naive_count(&text, &pat));
        }

        #[test]
        fn uppercasing_does_not_change_counts(
            body in "[a-zA-Z ,.]{0,80}",
            title in "[a-zA-Z ]{0,30}",
            query in "[a-zA-Z]{1,3}",
        ) {
            let doc = TagDocument {
                url_text: "http://s.test/p".into(),
                title_text: title.clone(),
                body_text: body.clone(),
                meta_texts: vec![body.clone()],
                heading_texts: vec![title.clone()],
                ..Default::default()
            };
            let upper = TagDocument {
                url_text: doc.url_text.to_uppercase(),
                title_text: title.to_uppercase(),
                body_text: body.to_uppercase(),
                meta_texts: vec![body.to_uppercase()],
                heading_texts: vec![title.to_uppercase()],
                ..Default::default()
            };
            prop_assert_eq!(
                count_occurrences(&doc, &query).unwrap(),
                count_occurrences(&upper, &query).unwrap()
            );
        }
    }
}
