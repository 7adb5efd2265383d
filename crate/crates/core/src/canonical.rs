//! Canonical URL form used as the identity key for deduplication, trap
//! guards, robots lookups and the offline corpus.
//!
//! Canonicalization rules:
//! - scheme and host are lowercased, only `http` and `https` are accepted
//! - the default port for the scheme is elided
//! - dot segments are removed and an empty path becomes `/`
//! - percent escapes in the path get uppercase hex digits, and escapes of
//!   unreserved characters are decoded
//! - the fragment is dropped, the query string is kept as written

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Serialize, Serializer};
use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrlError {
    #[error("malformed URL {raw:?}: {reason}")]
    MalformedUrl { raw: String, reason: String },
    #[error("unsupported scheme {scheme:?} in {raw:?}")]
    UnsupportedScheme { raw: String, scheme: String },
}

/// A normalized absolute `http`/`https` URL.
///
/// Equality, ordering and hashing use the canonical text only; the verbatim
/// source string is carried along for reporting.
#[derive(Clone)]
pub struct CanonicalUrl {
    url: Url,
    original: String,
}

impl CanonicalUrl {
    /// Parses `raw`, resolving it against `base` when it is a relative
    /// reference.
    pub fn parse(raw: &str, base: Option<&CanonicalUrl>) -> Result<Self, UrlError> {
        canonicalize(raw, base)
    }

    pub fn as_str(&self) -> &str {
        self.url.as_str()
    }

    pub fn original(&self) -> &str {
        &self.original
    }

    pub fn scheme(&self) -> &str {
        self.url.scheme()
    }

    pub fn host(&self) -> &str {
        self.url.host_str().unwrap_or_default()
    }

    /// Explicit port, `None` when it is the scheme default.
    pub fn port(&self) -> Option<u16> {
        self.url.port()
    }

    pub fn path(&self) -> &str {
        self.url.path()
    }

    pub fn query(&self) -> Option<&str> {
        self.url.query()
    }

    /// `scheme://host[:port]`, the key robots policies and politeness slots
    /// are tracked under.
    pub fn origin(&self) -> String {
        match self.port() {
            Some(port) => format!("{}://{}:{}", self.scheme(), self.host(), port),
            None => format!("{}://{}", self.scheme(), self.host()),
        }
    }

    /// Path plus query, as matched against robots.txt rules.
    pub fn path_and_query(&self) -> String {
        match self.query() {
            Some(q) => format!("{}?{}", self.path(), q),
            None => self.path().to_string(),
        }
    }

    /// Number of non-empty path segments.
    pub fn path_segments(&self) -> usize {
        self.path().split('/').filter(|s| !s.is_empty()).count()
    }
}

pub fn canonicalize(raw: &str, base: Option<&CanonicalUrl>) -> Result<CanonicalUrl, UrlError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(UrlError::MalformedUrl {
            raw: raw.to_string(),
            reason: "empty URL".into(),
        });
    }

    let parsed = match base {
        Some(base) => base.url.join(trimmed),
        None => Url::parse(trimmed),
    }
    .map_err(|e| UrlError::MalformedUrl {
        raw: raw.to_string(),
        reason: e.to_string(),
    })?;

    match parsed.scheme() {
        "http" | "https" => {}
        other => {
            return Err(UrlError::UnsupportedScheme {
                raw: raw.to_string(),
                scheme: other.to_string(),
            })
        }
    }
    if parsed.host_str().is_none_or(str::is_empty) {
        return Err(UrlError::MalformedUrl {
            raw: raw.to_string(),
            reason: "missing host".into(),
        });
    }

    let mut url = parsed;
    url.set_fragment(None);
    let path = normalize_percent_escapes(url.path());
    if path != url.path() {
        url.set_path(&path);
    }

    Ok(CanonicalUrl {
        url,
        original: raw.to_string(),
    })
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

fn normalize_percent_escapes(path: &str) -> String {
    let bytes = path.as_bytes();
    let mut out = String::with_capacity(path.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = &path[i + 1..i + 3];
            if let Ok(value) = u8::from_str_radix(hex, 16) {
                if is_unreserved(value) {
                    out.push(value as char);
                } else {
                    out.push('%');
                    out.push_str(&hex.to_ascii_uppercase());
                }
                i += 3;
                continue;
            }
        }
        out.push(bytes[i] as char);
        i += 1;
    }
    out
}

impl PartialEq for CanonicalUrl {
    fn eq(&self, other: &Self) -> bool {
        self.as_str() == other.as_str()
    }
}

impl Eq for CanonicalUrl {}

impl Hash for CanonicalUrl {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.as_str().hash(state);
    }
}

impl PartialOrd for CanonicalUrl {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CanonicalUrl {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Display for CanonicalUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CanonicalUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalUrl({})", self.as_str())
    }
}

impl Serialize for CanonicalUrl {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}
