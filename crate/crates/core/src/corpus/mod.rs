//! Offline fixture corpora.
//!
//! A corpus is a directory holding `manifest.tsv` and the page files it
//! references. The manifest format is line oriented, UTF-8, `\n` line ends:
//!
//! ```text
//! # focuscrawl-manifest v1
//! # url<TAB>status<TAB>content_type<TAB>file<TAB>redirect<TAB>label
//! http://fixture/html/default.asp	200	text/html	pages/default.html	-	1
//! http://fixture/old	301	-	-	http://fixture/html/default.asp	0
//! ```
//!
//! - The first line must be exactly `# focuscrawl-manifest v1`. Other lines
//!   starting with `#` and blank lines are ignored.
//! - Each entry has exactly six TAB-separated fields; `-` marks an absent
//!   value.
//! - `url` must already be in canonical form and unique.
//! - `status` is a decimal HTTP status code in 100..=599.
//! - `file` is a `/`-separated path relative to the corpus directory; absent
//!   means an empty body.
//! - `redirect` is required for 3xx statuses and must name another manifest
//!   entry, unless prefixed with `ext:` to mark an external target.
//! - `label` is `1` (relevant), `0` (irrelevant) or `-` (unlabeled).
//!
//! [`CorpusManifest::render`] writes this format byte-for-byte the same way
//! every time.
#![allow(clippy::tabs_in_doc_comments)]

mod generate;
mod trap;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

pub use generate::{generate, GeneratedCorpus, GeneratorSpec, Placement};
pub use trap::InfiniteTrapTransport;

use crate::canonical::{canonicalize, CanonicalUrl};
use crate::evaluator::RelevanceLabels;
use crate::fetcher::{RequestLimits, Response, Transport, TransportFailure};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MANIFEST_HEADER: &str = "# focuscrawl-manifest v1";
const COLUMNS_COMMENT: &str = "# url\tstatus\tcontent_type\tfile\tredirect\tlabel";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid manifest:\n  {}", .0.join("\n  "))]
    ManifestInvalid(Vec<String>),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RedirectTarget {
    Internal(CanonicalUrl),
    External(CanonicalUrl),
}

impl RedirectTarget {
    pub fn url(&self) -> &CanonicalUrl {
        match self {
            RedirectTarget::Internal(u) | RedirectTarget::External(u) => u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub url: CanonicalUrl,
    pub status: u16,
    pub content_type: Option<String>,
    pub file: Option<String>,
    pub redirect: Option<RedirectTarget>,
    pub label: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    /// Parses and validates manifest text. Every problem found is reported,
    /// not just the first.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut errors = Vec::new();
        let mut entries = Vec::new();
        let mut lines = text.lines().enumerate();

        match lines.next() {
            Some((_, first)) if first == MANIFEST_HEADER => {}
            _ => errors.push(format!("line 1: expected header {MANIFEST_HEADER:?}")),
        }

        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match parse_line(line) {
                Ok(entry) => entries.push(entry),
                Err(e) => errors.push(format!("line {lineno}: {e}")),
            }
        }

        let manifest = Self { entries };
        errors.extend(manifest.check_links());
        if errors.is_empty() {
            Ok(manifest)
        } else {
            Err(CorpusError::ManifestInvalid(errors))
        }
    }

    fn check_links(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.url.as_str()) {
                errors.push(format!("duplicate URL {}", e.url));
            }
        }
        for e in &self.entries {
            if let Some(RedirectTarget::Internal(target)) = &e.redirect {
                if !seen.contains(target.as_str()) {
                    errors.push(format!(
                        "{}: redirect target {} is not in the manifest (prefix with ext: if external)",
                        e.url, target
                    ));
                }
            }
        }
        errors
    }

    pub fn get(&self, url: &CanonicalUrl) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| &e.url == url)
    }

    pub fn labels(&self) -> RelevanceLabels {
        self.entries
            .iter()
            .filter_map(|e| e.label.map(|l| (e.url.clone(), l)))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        out.push_str(COLUMNS_COMMENT);
        out.push('\n');
        for e in &self.entries {
            let redirect = match &e.redirect {
                Some(RedirectTarget::Internal(u)) => u.to_string(),
                Some(RedirectTarget::External(u)) => format!("ext:{u}"),
                None => "-".into(),
            };
            let label = match e.label {
                Some(true) => "1",
                Some(false) => "0",
                None => "-",
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.url,
                e.status,
                e.content_type.as_deref().unwrap_or("-"),
                e.file.as_deref().unwrap_or("-"),
                redirect,
                label
            );
        }
        out
    }
}

fn optional(field: &str) -> Option<&str> {
    (field != "-").then_some(field)
}

fn parse_line(line: &str) -> Result<ManifestEntry, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 tab-separated fields, found {}", fields.len()));
    }
    let url = canonicalize(fields[0], None).map_err(|e| e.to_string())?;
    if url.as_str() != fields[0] {
        return Err(format!("URL {:?} is not canonical (expected {})", fields[0], url));
    }
    let status: u16 = fields[1]
        .parse()
        .ok()
        .filter(|s| (100..=599).contains(s))
        .ok_or_else(|| format!("bad status {:?}", fields[1]))?;
    let content_type = optional(fields[2]).map(str::to_string);
    let file = optional(fields[3]).map(str::to_string);
    if let Some(f) = &file {
        if !is_safe_relative(f) {
            return Err(format!("file path {f:?} must be relative and stay inside the corpus"));
        }
    }
    let redirect = match optional(fields[4]) {
        None => None,
        Some(raw) => {
            let (external, raw) = match raw.strip_prefix("ext:") {
                Some(rest) => (true, rest),
                None => (false, raw),
            };
            let target = canonicalize(raw, Some(&url)).map_err(|e| e.to_string())?;
            Some(if external {
                RedirectTarget::External(target)
            } else {
                RedirectTarget::Internal(target)
            })
        }
    };
    if (300..400).contains(&status) && redirect.is_none() {
        return Err(format!("status {status} needs a redirect target"));
    }
    let label = match fields[5] {
        "1" => Some(true),
        "0" => Some(false),
        "-" => None,
        other => return Err(format!("bad label {other:?}")),
    };
    Ok(ManifestEntry {
        url,
        status,
        content_type,
        file,
        redirect,
        label,
    })
}

fn is_safe_relative(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

/// A manifest plus the bytes of every file it references.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Corpus {
    pub fn builder() -> CorpusBuilder {
        CorpusBuilder::default()
    }

    pub fn labels(&self) -> RelevanceLabels {
        self.manifest.labels()
    }

    pub fn body_of(&self, url: &CanonicalUrl) -> Option<&[u8]> {
        let file = self.manifest.get(url)?.file.as_ref()?;
        self.files.get(file).map(Vec::as_slice)
    }

    /// Writes `manifest.tsv` and every file under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        fs::write(&manifest_path, self.manifest.render()).map_err(io_err(&manifest_path))
    }

    pub fn transport(&self) -> OfflineTransport {
        OfflineTransport::new(self)
    }
}

/// Loads and validates a corpus directory.
pub fn load(dir: &Path) -> Result<Corpus, CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest = CorpusManifest::parse(&text)?;

    let mut errors = Vec::new();
    let mut files = BTreeMap::new();
    for entry in &manifest.entries {
        let Some(rel) = &entry.file else { continue };
        if files.contains_key(rel) {
            continue;
        }
        match fs::read(dir.join(rel)) {
            Ok(bytes) => {
                files.insert(rel.clone(), bytes);
            }
            Err(e) => errors.push(format!("{}: file {rel}: {e}", entry.url)),
        }
    }
    if !errors.is_empty() {
        return Err(CorpusError::ManifestInvalid(errors));
    }
    Ok(Corpus { manifest, files })
}

/// Serves a corpus from memory. Performs no network operations; unknown URLs
/// answer 404.
#[derive(Debug, Clone, Default)]
pub struct OfflineTransport {
    responses: HashMap<String, Response>,
}

impl OfflineTransport {
    pub fn new(corpus: &Corpus) -> Self {
        let responses = corpus
            .manifest
            .entries
            .iter()
            .map(|e| {
                let body = e
                    .file
                    .as_ref()
                    .and_then(|f| corpus.files.get(f))
                    .cloned()
                    .unwrap_or_default();
                let resp = Response {
                    status: e.status,
                    content_type: e.content_type.clone(),
                    location: e.redirect.as_ref().map(|r| r.url().to_string()),
                    body,
                };
                (e.url.to_string(), resp)
            })
            .collect();
        Self { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Transport for OfflineTransport {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure> {
        match self.responses.get(url.as_str()) {
            Some(resp) if resp.body.len() > limits.max_body_bytes => Err(TransportFailure::TooLarge),
            Some(resp) => Ok(resp.clone()),
            None => Ok(Response {
                status: 404,
                content_type: Some("text/html".into()),
                location: None,
                body: Vec::new(),
            }),
        }
    }
}

/// Assembles small corpora in code, mostly for tests.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    corpus: Corpus,
}

impl CorpusBuilder {
    fn url(raw: &str) -> CanonicalUrl {
        canonicalize(raw, None).unwrap_or_else(|e| panic!("builder URL {raw:?}: {e}"))
    }

    fn add(mut self, entry: ManifestEntry, body: Option<Vec<u8>>) -> Self {
        let mut entry = entry;
        if let Some(body) = body {
            let name = format!("files/{:04}", self.corpus.manifest.entries.len());
            self.corpus.files.insert(name.clone(), body);
            entry.file = Some(name);
        }
        self.corpus.manifest.entries.push(entry);
        self
    }

    pub fn page(self, url: &str, html: &str) -> Self {
        self.labeled_page(url, html, None)
    }

    pub fn labeled_page(self, url: &str, html: &str, label: Option<bool>) -> Self {
        self.entry(url, 200, Some("text/html"), Some(html.as_bytes().to_vec()), None, label)
    }

    pub fn redirect(self, from: &str, to: &str) -> Self {
        self.entry(from, 302, None, None, Some(to), None)
    }

    pub fn robots(self, origin: &str, text: &str) -> Self {
        let url = format!("{}/robots.txt", origin.trim_end_matches('/'));
        self.entry(&url, 200, Some("text/plain"), Some(text.as_bytes().to_vec()), None, None)
    }

    pub fn entry(
        self,
        url: &str,
        status: u16,
        content_type: Option<&str>,
        body: Option<Vec<u8>>,
        redirect: Option<&str>,
        label: Option<bool>,
    ) -> Self {
        let url = Self::url(url);
        let redirect = redirect.map(|r| {
            RedirectTarget::Internal(
                canonicalize(r, Some(&url)).unwrap_or_else(|e| panic!("redirect {r:?}: {e}")),
            )
        });
        let entry = ManifestEntry {
            url,
            status,
            content_type: content_type.map(str::to_string),
            file: None,
            redirect,
            label,
        };
        self.add(entry, body)
    }

    pub fn build(self) -> Corpus {
        self.corpus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Corpus {
        Corpus::builder()
            .labeled_page("http://a.test/", "<a href=x>x</a>", Some(true))
            .labeled_page("http://a.test/x", "<p>x</p>", Some(false))
            .redirect("http://a.test/old", "/x")
            .robots("http://a.test", "User-agent: *\nDisallow: /private\n")
            .build()
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = sample();
        corpus.write(dir.path()).unwrap();
        let loaded = load(dir.path()).unwrap();
        assert_eq!(loaded, corpus);
        assert_eq!(loaded.labels().len(), 2);
    }

    #[test]
    fn render_format_is_stable() {
        let text = sample().manifest.render();
        let expected = "# focuscrawl-manifest v1\n\
# url\tstatus\tcontent_type\tfile\tredirect\tlabel\n\
http://a.test/\t200\ttext/html\tfiles/0000\t-\t1\n\
http://a.test/x\t200\ttext/html\tfiles/0001\t-\t0\n\
http://a.test/old\t302\t-\t-\thttp://a.test/x\t-\n\
http://a.test/robots.txt\t200\ttext/plain\tfiles/0003\t-\t-\n";
        assert_eq!(text, expected);
    }

    fn invalid(text: &str) -> Vec<String> {
        match CorpusManifest::parse(text) {
            Err(CorpusError::ManifestInvalid(errs)) => errs,
            other => panic!("expected ManifestInvalid, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_url_is_invalid() {
        let errs = invalid(&format!(
            "{MANIFEST_HEADER}\nhttp://a.test/\t200\t-\t-\t-\t-\nhttp://a.test/\t404\t-\t-\t-\t-\n"
        ));
        assert!(errs[0].contains("duplicate"));
    }

    #[test]
    fn missing_file_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(MANIFEST_FILE),
            format!("{MANIFEST_HEADER}\nhttp://a.test/\t200\ttext/html\tnope.html\t-\t1\n"),
        )
        .unwrap();
        match load(dir.path()) {
            Err(CorpusError::ManifestInvalid(errs)) => assert!(errs[0].contains("nope.html")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_problems_are_enumerated() {
        let errs = invalid(
            "wrong header\n\
             http://A.test/\t200\t-\t-\t-\t-\n\
             http://a.test/r\t301\t-\t-\t-\t-\n\
             http://a.test/s\t302\t-\t-\t/nowhere\t-\n\
             http://a.test/t\t99\t-\t-\t-\t-\n\
             http://a.test/u\t200\t-\t../escape\t-\t-\n\
             http://a.test/v\t200\t-\t-\t-\tyes\n\
             only\tthree\tfields\n",
        );
        assert_eq!(errs.len(), 8, "{errs:#?}");
    }

    #[test]
    fn external_redirects_are_allowed() {
        let m = CorpusManifest::parse(&format!(
            "{MANIFEST_HEADER}\nhttp://a.test/r\t301\t-\t-\text:http://elsewhere.test/\t-\n"
        ))
        .unwrap();
        assert!(matches!(m.entries[0].redirect, Some(RedirectTarget::External(_))));
        assert!(m.render().contains("ext:http://elsewhere.test/"));
    }

    #[test]
    fn offline_transport_serves_exact_bytes() {
        let corpus = sample();
        let t = corpus.transport();
        let limits = RequestLimits {
            max_body_bytes: 1 << 20,
            timeout: std::time::Duration::from_secs(1),
        };
        let u = canonicalize("http://a.test/x", None).unwrap();
        let resp = t.get(&u, &limits).unwrap();
        assert_eq!(resp.body, b"<p>x</p>");
        assert_eq!(resp.status, 200);
        let missing = canonicalize("http://a.test/missing", None).unwrap();
        assert_eq!(t.get(&missing, &limits).unwrap().status, 404);
        let old = canonicalize("http://a.test/old", None).unwrap();
        assert_eq!(t.get(&old, &limits).unwrap().location.as_deref(), Some("http://a.test/x"));
    }
}
