//! Seeded generator for synthetic multi-site corpora with planted relevant
//! pages, decoys and optional spider traps.
//!
//! Page kinds:
//! - relevant (label 1): the query is placed 1 to 4 times, each time in a
//!   region drawn from the placement distribution
//! - decoy (label 0): the query is mentioned in passing in the body, and
//!   sometimes once in a heading
//! - URL noise (label 0): the query appears only in the URL slug
//! - plain (label 0): the query appears nowhere
//!
//! Output is a pure function of the spec.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, CorpusManifest, ManifestEntry, RedirectTarget};
use crate::canonical::{canonicalize, CanonicalUrl};
use crate::html;
use crate::relevance::{count_with, fold_case, Query};

/// Relative odds of placing a query occurrence in each region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Placement {
    pub meta: f64,
    pub url: f64,
    pub title: f64,
    pub heading: f64,
    pub body: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            meta: 0.2,
            url: 0.1,
            title: 0.2,
            heading: 0.2,
            body: 0.3,
        }
    }
}

impl Placement {
    fn weights(&self) -> [f64; 5] {
        [self.meta, self.url, self.title, self.heading, self.body]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub sites: usize,
    pub pages_per_site: usize,
    pub fanout: usize,
    pub relevant_fraction: f64,
    pub query: String,
    pub placement: Placement,
    /// Share of irrelevant pages that mention the query in passing.
    pub decoy_fraction: f64,
    /// Share of irrelevant pages whose URL slug contains the query.
    pub url_noise_fraction: f64,
    /// Plant a deep path chain and a redirect cycle on the first site.
    pub traps: bool,
    /// Sprinkle links to URLs that are not in the corpus.
    pub dead_links: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            sites: 1,
            pages_per_site: 10,
            fanout: 3,
            relevant_fraction: 0.3,
            query: "cricket".into(),
            placement: Placement::default(),
            decoy_fraction: 0.0,
            url_noise_fraction: 0.0,
            traps: false,
            dead_links: false,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: &str| Err(CorpusError::InvalidSpec(msg.to_string()));
        if self.sites == 0 {
            return bad("sites must be at least 1");
        }
        if self.pages_per_site == 0 {
            return bad("pages_per_site must be at least 1");
        }
        if self.fanout == 0 {
            return bad("fanout must be at least 1");
        }
        for (name, v) in [
            ("relevant_fraction", self.relevant_fraction),
            ("decoy_fraction", self.decoy_fraction),
            ("url_noise_fraction", self.url_noise_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CorpusError::InvalidSpec(format!("{name} must be within [0, 1]")));
            }
        }
        if self.decoy_fraction + self.url_noise_fraction > 1.0 {
            return bad("decoy_fraction + url_noise_fraction must not exceed 1");
        }
        if self.query.trim().is_empty() {
            return bad("query must not be empty");
        }
        let w = self.placement.weights();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return bad("placement weights must be non-negative with a positive sum");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub corpus: Corpus,
    /// Root page of every site, in site order.
    pub seeds: Vec<CanonicalUrl>,
}

const FILLER: &[&str] = &[
    "amber", "anchor", "archive", "autumn", "balance", "banner", "basket", "beacon", "bridge",
    "bright", "canyon", "careful", "castle", "center", "channel", "cherry", "circle", "classic",
    "clever", "cloud", "coastal", "copper", "corner", "cotton", "county", "crystal", "daily",
    "design", "desert", "detail", "direct", "distant", "editor", "effort", "engine", "evening",
    "fabric", "famous", "feather", "figure", "forest", "formal", "fortune", "garden", "gentle",
    "global", "golden", "gravel", "harbor", "hidden", "history", "honest", "island", "journal",
    "kettle", "kitchen", "ladder", "lantern", "leather", "letter", "little", "local", "magnet",
    "market", "meadow", "member", "method", "middle", "mirror", "modern", "moment", "morning",
    "narrow", "native", "network", "notice", "number", "object", "office", "orange", "orbit",
    "output", "palace", "parcel", "pepper", "pillow", "planet", "pocket", "policy", "portal",
    "public", "puzzle", "quiet", "rabbit", "random", "record", "region", "report", "ribbon",
    "river", "rocket", "saddle", "salmon", "season", "second", "signal", "silver", "simple",
    "spring", "square", "stable", "street", "summer", "system", "table", "talent", "timber",
    "travel", "tunnel", "update", "valley", "velvet", "vessel", "window", "winter", "wonder",
    "yellow",
];

const SECTIONS: &[&str] = &["news", "guide", "notes", "pages", "stories", "topics", "info", "misc"];

const HOST_STEMS: &[&str] = &[
    "alder", "birch", "cedar", "elm", "fir", "hazel", "larch", "maple", "oak", "pine", "rowan",
    "spruce", "willow", "yew",
];

const TRAP_CHAIN_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Relevant,
    Decoy,
    UrlNoise,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Meta,
    Url,
    Title,
    Heading,
    Body,
}

const REGIONS: [Region; 5] = [Region::Meta, Region::Url, Region::Title, Region::Heading, Region::Body];

struct PagePlan {
    site: usize,
    index: usize,
    kind: Kind,
    placements: Vec<Region>,
    url: CanonicalUrl,
    file: String,
}

struct Words<'a> {
    vocab: &'a [&'a str],
}

impl Words<'_> {
    fn pick<'b>(&'b self, rng: &mut ChaCha8Rng) -> &'b str {
        self.vocab[rng.gen_range(0..self.vocab.len())]
    }

    fn phrase(&self, rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<String> {
        let n = rng.gen_range(min..=max);
        (0..n).map(|_| self.pick(rng).to_string()).collect()
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn insert_at_random(rng: &mut ChaCha8Rng, words: &mut Vec<String>, item: &str) {
    let at = rng.gen_range(0..=words.len());
    words.insert(at, item.to_string());
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn generate(spec: &GeneratorSpec) -> Result<GeneratedCorpus, CorpusError> {
    spec.validate()?;
    let query = Query::phrase(&spec.query).map_err(|e| CorpusError::InvalidSpec(e.to_string()))?;
    let terms: Vec<String> = query.as_str().split(' ').map(fold_case).collect();
    let clean = |w: &&str| terms.iter().all(|t| !w.contains(t.as_str()));

    let vocab: Vec<&str> = FILLER.iter().copied().filter(clean).collect();
    let sections: Vec<&str> = SECTIONS.iter().copied().filter(clean).collect();
    let stems: Vec<&str> = HOST_STEMS.iter().copied().filter(clean).collect();
    if vocab.len() < 40 || sections.is_empty() || stems.is_empty() {
        return Err(CorpusError::InvalidSpec(format!(
            "query {:?} collides with too much of the generator vocabulary",
            spec.query
        )));
    }
    let words = Words { vocab: &vocab };
    let query_slug = query.as_str().to_lowercase().replace(' ', "-");

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.sites * spec.pages_per_site;

    // Kinds.
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let n_rel = ((spec.relevant_fraction * total as f64).round() as usize).min(total);
    let n_irr = total - n_rel;
    let n_decoy = (spec.decoy_fraction * n_irr as f64).round() as usize;
    let n_noise = ((spec.url_noise_fraction * n_irr as f64).round() as usize).min(n_irr - n_decoy);
    let mut kinds = vec![Kind::Plain; total];
    for (rank, &page) in order.iter().enumerate() {
        kinds[page] = if rank < n_rel {
            Kind::Relevant
        } else if rank < n_rel + n_decoy {
            Kind::Decoy
        } else if rank < n_rel + n_decoy + n_noise {
            Kind::UrlNoise
        } else {
            Kind::Plain
        };
    }

    let hosts: Vec<String> = (0..spec.sites)
        .map(|i| format!("{}{}.test", stems[i % stems.len()], i + 1))
        .collect();

    // URLs and placements.
    let placement_weights = spec.placement.weights();
    let mut plans = Vec::with_capacity(total);
    for (global, &kind) in kinds.iter().enumerate() {
        let (site, index) = (global / spec.pages_per_site, global % spec.pages_per_site);
        let mut placements = Vec::new();
        if kind == Kind::Relevant {
            let n = rng.gen_range(1..=4);
            while placements.len() < n {
                let region = REGIONS[weighted_index(&mut rng, &placement_weights)];
                // The site root has no slug to carry the query.
                if region == Region::Url && index == 0 {
                    if placement_weights.iter().enumerate().all(|(i, w)| i == 1 || *w == 0.0) {
                        break;
                    }
                    continue;
                }
                placements.push(region);
            }
        }
        let path = if index == 0 {
            "/".to_string()
        } else {
            let section = sections[rng.gen_range(0..sections.len())];
            let slug = if kind == Kind::UrlNoise || placements.contains(&Region::Url) {
                format!("{}-{}", query_slug, words.pick(&mut rng))
            } else {
                words.pick(&mut rng).to_string()
            };
            format!("/{section}/{slug}-{index}")
        };
        let url = canonicalize(&format!("http://{}{}", hosts[site], path), None)
            .map_err(|e| CorpusError::InvalidSpec(format!("generated bad URL: {e}")))?;
        plans.push(PagePlan {
            site,
            index,
            kind,
            placements,
            url,
            file: format!("pages/{}/{:03}.html", hosts[site], index),
        });
    }

    // Trap structures hang off the first site.
    let trap_host = &hosts[0];
    let trap_chain: Vec<CanonicalUrl> = if spec.traps {
        (1..=TRAP_CHAIN_LEN)
            .map(|n| {
                let path = vec!["a"; n].join("/");
                canonicalize(&format!("http://{trap_host}/trap/{path}"), None).expect("static trap URL")
            })
            .collect()
    } else {
        Vec::new()
    };
    let loop_urls: Vec<CanonicalUrl> = if spec.traps {
        ["/loop/1", "/loop/2"]
            .iter()
            .map(|p| canonicalize(&format!("http://{trap_host}{p}"), None).expect("static loop URL"))
            .collect()
    } else {
        Vec::new()
    };

    let mut manifest = CorpusManifest::default();
    let mut files = BTreeMap::new();

    for plan in &plans {
        let links = page_links(spec, plan, &plans, &mut rng, &trap_chain, &loop_urls, &words);
        let html = render_page(plan, &links, &query, &words, &mut rng);
        files.insert(plan.file.clone(), html.into_bytes());
        manifest.entries.push(ManifestEntry {
            url: plan.url.clone(),
            status: 200,
            content_type: Some("text/html".into()),
            file: Some(plan.file.clone()),
            redirect: None,
            label: Some(plan.kind == Kind::Relevant),
        });
    }

    for (n, url) in trap_chain.iter().enumerate() {
        let next = format!("{}/a", url.path());
        let title = words.phrase(&mut rng, 2, 3).join(" ");
        let html = format!(
            "<!DOCTYPE html>\n<html>\n<head>\n<title>{}</title>\n</head>\n<body>\n<p>{}</p>\n<a href=\"{next}\">{}</a>\n</body>\n</html>\n",
            capitalize(&title),
            words.phrase(&mut rng, 6, 10).join(" "),
            words.pick(&mut rng)
        );
        let file = format!("pages/{trap_host}/trap-{:02}.html", n + 1);
        files.insert(file.clone(), html.into_bytes());
        manifest.entries.push(ManifestEntry {
            url: url.clone(),
            status: 200,
            content_type: Some("text/html".into()),
            file: Some(file),
            redirect: None,
            label: Some(false),
        });
    }
    for (i, url) in loop_urls.iter().enumerate() {
        let target = loop_urls[(i + 1) % loop_urls.len()].clone();
        manifest.entries.push(ManifestEntry {
            url: url.clone(),
            status: 302,
            content_type: None,
            file: None,
            redirect: Some(RedirectTarget::Internal(target)),
            label: Some(false),
        });
    }

    let corpus = Corpus { manifest, files };
    check_planting(&corpus, &plans, &query)?;

    let seeds = plans
        .iter()
        .filter(|p| p.index == 0)
        .map(|p| p.url.clone())
        .collect();
    Ok(GeneratedCorpus { corpus, seeds })
}

fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

struct Link {
    href: String,
    anchor: String,
}

#[allow(clippy::too_many_arguments)]
fn page_links(
    spec: &GeneratorSpec,
    plan: &PagePlan,
    plans: &[PagePlan],
    rng: &mut ChaCha8Rng,
    trap_chain: &[CanonicalUrl],
    loop_urls: &[CanonicalUrl],
    words: &Words<'_>,
) -> Vec<Link> {
    let site_base = plan.site * spec.pages_per_site;
    let mut targets: Vec<String> = Vec::new();

    // Tree edges keep every page reachable from its site root.
    for c in 1..=spec.fanout {
        let child = plan.index * spec.fanout + c;
        if child < spec.pages_per_site {
            targets.push(plans[site_base + child].url.path().to_string());
        }
    }
    for _ in 0..spec.fanout {
        let other = rng.gen_range(0..spec.pages_per_site);
        targets.push(plans[site_base + other].url.path().to_string());
    }
    if spec.sites > 1 && rng.gen_bool(0.1) {
        let mut site = rng.gen_range(0..spec.sites - 1);
        if site >= plan.site {
            site += 1;
        }
        let page = rng.gen_range(0..spec.pages_per_site);
        targets.push(plans[site * spec.pages_per_site + page].url.to_string());
    }
    if spec.dead_links && rng.gen_bool(0.1) {
        targets.push(format!("/gone/{}-{}", words.pick(rng), plan.index));
    }
    if plan.site == 0 && plan.index == 0 {
        if let Some(first) = trap_chain.first() {
            targets.push(first.path().to_string());
        }
        if let Some(first) = loop_urls.first() {
            targets.push(first.path().to_string());
        }
    }
    targets
        .into_iter()
        .map(|href| Link {
            href,
            anchor: words.phrase(rng, 1, 3).join(" "),
        })
        .collect()
}

fn render_page(
    plan: &PagePlan,
    links: &[Link],
    query: &Query,
    words: &Words<'_>,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut title = words.phrase(rng, 3, 5);
    let mut description = words.phrase(rng, 8, 12);
    let keywords = words.phrase(rng, 3, 3);
    let mut headings: Vec<Vec<String>> = (0..rng.gen_range(1..=2)).map(|_| words.phrase(rng, 2, 4)).collect();
    let mut paragraphs: Vec<Vec<String>> = (0..rng.gen_range(2..=3)).map(|_| words.phrase(rng, 12, 25)).collect();
    let q = query.as_str();

    for region in &plan.placements {
        match region {
            Region::Meta => insert_at_random(rng, &mut description, q),
            Region::Title => insert_at_random(rng, &mut title, q),
            Region::Heading => {
                let h = rng.gen_range(0..headings.len());
                insert_at_random(rng, &mut headings[h], q);
            }
            Region::Body => {
                let p = rng.gen_range(0..paragraphs.len());
                insert_at_random(rng, &mut paragraphs[p], q);
            }
            Region::Url => {}
        }
    }
    if plan.kind == Kind::Decoy {
        for _ in 0..rng.gen_range(2..=6) {
            let p = rng.gen_range(0..paragraphs.len());
            insert_at_random(rng, &mut paragraphs[p], q);
        }
        if rng.gen_bool(0.3) {
            let h = rng.gen_range(0..headings.len());
            insert_at_random(rng, &mut headings[h], q);
        }
    }

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    html.push_str(&format!("<title>{}</title>\n", escape(&capitalize(&title.join(" ")))));
    html.push_str(&format!(
        "<meta name=\"description\" content=\"{}\">\n",
        escape(&capitalize(&description.join(" ")))
    ));
    html.push_str(&format!("<meta name=\"keywords\" content=\"{}\">\n", escape(&keywords.join(", "))));
    html.push_str("</head>\n<body>\n");
    for (i, h) in headings.iter().enumerate() {
        let level = if i == 0 { 1 } else { 2 };
        html.push_str(&format!("<h{level}>{}</h{level}>\n", escape(&capitalize(&h.join(" ")))));
    }
    for p in &paragraphs {
        html.push_str(&format!("<p>{}.</p>\n", escape(&capitalize(&p.join(" ")))));
    }
    html.push_str("<ul>\n");
    for link in links {
        html.push_str(&format!(
            "<li><a href=\"{}\">{}</a></li>\n",
            escape(&link.href),
            escape(&link.anchor)
        ));
    }
    html.push_str("</ul>\n</body>\n</html>\n");
    html
}

/// Plain pages must not contain the query anywhere and relevant pages must
/// contain it somewhere; anything else means the query collided with the
/// generated scaffolding.
fn check_planting(corpus: &Corpus, plans: &[PagePlan], query: &Query) -> Result<(), CorpusError> {
    let clean_urls = corpus
        .manifest
        .entries
        .iter()
        .filter(|e| !plans.iter().any(|p| p.url == e.url) || {
            plans.iter().any(|p| p.url == e.url && p.kind == Kind::Plain)
        });
    for entry in clean_urls {
        if query.count_in(entry.url.as_str()) > 0 {
            return Err(collision(query, &entry.url));
        }
        if let Some(body) = corpus.body_of(&entry.url) {
            let doc = html::parse(body, &entry.url).map_err(|e| CorpusError::InvalidSpec(e.to_string()))?;
            let c = count_with(&doc, query);
            if c.meta + c.url + c.title + c.heading + c.body > 0 {
                return Err(collision(query, &entry.url));
            }
        }
    }
    Ok(())
}

fn collision(query: &Query, url: &CanonicalUrl) -> CorpusError {
    CorpusError::InvalidSpec(format!(
        "query {:?} occurs in generated scaffolding of {url}",
        query.as_str()
    ))
}
