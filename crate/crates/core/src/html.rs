//! Tolerant HTML parsing into the scoring regions of a page.
//!
//! The tokenizer accepts the kind of markup found on real pages: unquoted or
//! single-quoted attributes, uppercase tag names, unclosed elements, and
//! whitespace inside tag delimiters (`< title >`, `< /body >`) for known
//! element names. Script and style contents and comments are dropped.

use std::collections::BTreeSet;
use std::fmt;

use encoding_rs::{Encoding, UTF_8};
use serde::Serialize;
use thiserror::Error;

use crate::canonical::{canonicalize, CanonicalUrl};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HtmlError {
    #[error("not an HTML document: {0}")]
    NotHtml(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotsDirective {
    NoIndex,
    NoFollow,
}

impl fmt::Display for RobotsDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RobotsDirective::NoIndex => "noindex",
            RobotsDirective::NoFollow => "nofollow",
        })
    }
}

/// A page split into the regions the relevance scorer counts over.
///
/// All region texts are plain text with entities decoded and whitespace
/// collapsed. Heading text is not repeated in `body_text`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagDocument {
    pub url_text: String,
    pub meta_texts: Vec<String>,
    pub title_text: String,
    pub heading_texts: Vec<String>,
    pub body_text: String,
    /// Raw `href` values in document order, duplicates kept.
    pub outlinks: Vec<String>,
    pub robots_meta: BTreeSet<RobotsDirective>,
}

impl TagDocument {
    pub fn has(&self, directive: RobotsDirective) -> bool {
        self.robots_meta.contains(&directive)
    }
}

/// Links resolved from a document; `dropped` counts hrefs that were
/// malformed or used a non-http(s) scheme.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedLinks {
    pub links: Vec<CanonicalUrl>,
    pub dropped: usize,
}

pub fn is_html_content_type(content_type: &str) -> bool {
    let mime = content_type
        .split(';')
        .next()
        .unwrap_or_default()
        .trim()
        .to_ascii_lowercase();
    matches!(mime.as_str(), "text/html" | "application/xhtml+xml")
}

/// Parses a fetched body, treating a declared non-HTML content type as
/// `NotHtml`. A missing content type is sniffed.
pub fn parse_response(
    body: &[u8],
    content_type: Option<&str>,
    page_url: &CanonicalUrl,
) -> Result<TagDocument, HtmlError> {
    if let Some(ct) = content_type {
        if !is_html_content_type(ct) {
            return Err(HtmlError::NotHtml(format!("content type {ct}")));
        }
    }
    let text = decode_body(body, content_type)?;
    Ok(parse_str(&text, page_url))
}

pub fn parse(body: &[u8], page_url: &CanonicalUrl) -> Result<TagDocument, HtmlError> {
    parse_response(body, None, page_url)
}

/// Resolves every outlink against `base`, keeping document order.
pub fn extract_links(doc: &TagDocument, base: &CanonicalUrl) -> ExtractedLinks {
    let mut out = ExtractedLinks::default();
    for href in &doc.outlinks {
        match canonicalize(href, Some(base)) {
            Ok(url) => out.links.push(url),
            Err(_) => out.dropped += 1,
        }
    }
    out
}

pub fn robots_directives(doc: &TagDocument) -> BTreeSet<RobotsDirective> {
    doc.robots_meta.clone()
}

fn parse_robots_content(content: &str, into: &mut BTreeSet<RobotsDirective>) {
    for token in content.split(',') {
        match token.trim().to_ascii_lowercase().as_str() {
            "noindex" => {
                into.insert(RobotsDirective::NoIndex);
            }
            "nofollow" => {
                into.insert(RobotsDirective::NoFollow);
            }
            "none" => {
                into.insert(RobotsDirective::NoIndex);
                into.insert(RobotsDirective::NoFollow);
            }
            _ => {}
        }
    }
}

const SNIFF_LEN: usize = 1024;

fn decode_body(body: &[u8], content_type: Option<&str>) -> Result<String, HtmlError> {
    let head = &body[..body.len().min(SNIFF_LEN)];
    if head.contains(&0) {
        return Err(HtmlError::NotHtml("binary content".into()));
    }
    let encoding = content_type
        .and_then(charset_label)
        .and_then(|label| Encoding::for_label(label.as_bytes()))
        .or_else(|| sniff_meta_charset(head))
        .unwrap_or(UTF_8);
    let (text, _, _) = encoding.decode(body);
    Ok(text.into_owned())
}

fn charset_label(s: &str) -> Option<String> {
    let lower = s.to_ascii_lowercase();
    let at = lower.find("charset")?;
    let rest = lower[at + "charset".len()..].trim_start();
    let rest = rest.strip_prefix('=')?.trim_start();
    let rest = rest.trim_start_matches(['"', '\'']);
    let label: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '.'))
        .collect();
    (!label.is_empty()).then_some(label)
}

fn sniff_meta_charset(head: &[u8]) -> Option<&'static Encoding> {
    let text = String::from_utf8_lossy(head).to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = text[from..].find("<meta") {
        let start = from + pos;
        let end = text[start..].find('>').map_or(text.len(), |e| start + e);
        if let Some(label) = charset_label(&text[start..end]) {
            if let Some(enc) = Encoding::for_label(label.as_bytes()) {
                return Some(enc);
            }
        }
        from = end;
    }
    None
}

// ---------------------------------------------------------------------------
// Tokenizer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
    },
    End {
        name: String,
    },
    Text(String),
}

/// Element names accepted when the tag has whitespace after `<` or `</`.
const KNOWN_ELEMENTS: &[&str] = &[
    "a", "b", "body", "br", "div", "em", "h1", "h2", "h3", "h4", "h5", "h6", "head", "hr",
    "html", "i", "img", "li", "link", "meta", "ol", "p", "script", "span", "strong", "style",
    "table", "td", "th", "title", "tr", "u", "ul",
];

/// Elements that do not break words when adjacent to text.
const INLINE_ELEMENTS: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "data", "dfn", "em", "font", "i", "kbd",
    "mark", "q", "s", "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var", "wbr",
];

const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

/// Elements that may appear in `<head>` without implying the body started.
const HEAD_ELEMENTS: &[&str] = &[
    "base", "link", "meta", "noscript", "script", "style", "template", "title",
];

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn next_token(&mut self) -> Option<Token> {
        loop {
            if self.pos >= self.src.len() {
                return None;
            }
            let rest = self.rest();
            if let Some(comment) = rest.strip_prefix("<!--") {
                self.pos = match comment.find("-->") {
                    Some(end) => self.pos + 4 + end + 3,
                    None => self.src.len(),
                };
                continue;
            }
            if rest.starts_with("<!") || rest.starts_with("<?") {
                self.pos = match rest.find('>') {
                    Some(end) => self.pos + end + 1,
                    None => self.src.len(),
                };
                continue;
            }
            if let Some(after) = rest.strip_prefix('<') {
                if let Some(token) = self.try_tag() {
                    return Some(token);
                }
                // Not a tag: the '<' is literal text.
                let end = after.find('<').map_or(rest.len(), |e| e + 1);
                self.pos += end;
                return Some(Token::Text(rest[..end].to_string()));
            }
            let end = rest.find('<').unwrap_or(rest.len());
            self.pos += end;
            return Some(Token::Text(rest[..end].to_string()));
        }
    }

    fn try_tag(&mut self) -> Option<Token> {
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut i = 1;
        let mut spaced = false;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
            spaced = true;
        }
        let closing = i < bytes.len() && bytes[i] == b'/';
        if closing {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
                spaced = true;
            }
        }
        if i >= bytes.len() || !bytes[i].is_ascii_alphabetic() {
            return None;
        }
        let name_start = i;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-') {
            i += 1;
        }
        let name = rest[name_start..i].to_ascii_lowercase();
        if spaced && !KNOWN_ELEMENTS.contains(&name.as_str()) {
            return None;
        }

        let (attrs, consumed) = parse_attributes(&rest[i..]);
        self.pos += i + consumed;

        if closing {
            return Some(Token::End { name });
        }
        if RAW_TEXT_ELEMENTS.contains(&name.as_str()) {
            self.skip_raw_text(&name);
        }
        Some(Token::Start { name, attrs })
    }

    /// Skips to just past the matching end tag, or to end of input.
    fn skip_raw_text(&mut self, name: &str) {
        let rest = self.rest();
        let lower = rest.to_ascii_lowercase();
        let mut from = 0;
        while let Some(off) = lower[from..].find('<') {
            let at = from + off;
            let after = lower[at + 1..].trim_start();
            if let Some(after_slash) = after.strip_prefix('/') {
                let after_slash = after_slash.trim_start();
                if after_slash.starts_with(name) {
                    let tail_start = lower.len() - after_slash.len() + name.len();
                    let close = lower[tail_start..].find('>').map_or(lower.len(), |c| tail_start + c + 1);
                    self.pos += close;
                    return;
                }
            }
            from = at + 1;
        }
        self.pos = self.src.len();
    }
}

/// Parses attributes up to and including the closing '>'. Returns the
/// attributes and the number of bytes consumed.
fn parse_attributes(s: &str) -> (Vec<(String, String)>, usize) {
    let bytes = s.as_bytes();
    let mut attrs = Vec::new();
    let mut i = 0;
    loop {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'/') {
            i += 1;
        }
        if i >= bytes.len() {
            return (attrs, i);
        }
        if bytes[i] == b'>' {
            return (attrs, i + 1);
        }
        let name_start = i;
        while i < bytes.len()
            && !bytes[i].is_ascii_whitespace()
            && !matches!(bytes[i], b'=' | b'>' | b'/')
        {
            i += 1;
        }
        if i == name_start {
            // Stray '=' or similar; skip it.
            i += 1;
            continue;
        }
        let name = s[name_start..i].to_ascii_lowercase();
        let mut j = i;
        while j < bytes.len() && bytes[j].is_ascii_whitespace() {
            j += 1;
        }
        let mut value = String::new();
        if j < bytes.len() && bytes[j] == b'=' {
            j += 1;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if j < bytes.len() && (bytes[j] == b'"' || bytes[j] == b'\'') {
                let quote = bytes[j];
                let start = j + 1;
                let end = s[start..]
                    .bytes()
                    .position(|b| b == quote)
                    .map_or(s.len(), |p| start + p);
                value = decode_entities(&s[start..end]);
                j = (end + 1).min(s.len());
            } else {
                let start = j;
                while j < bytes.len() && !bytes[j].is_ascii_whitespace() && bytes[j] != b'>' {
                    j += 1;
                }
                value = decode_entities(&s[start..j]);
            }
            i = j;
        }
        attrs.push((name, value));
    }
}

// ---------------------------------------------------------------------------
// Entities

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "copy" => '©',
        "reg" => '®',
        "trade" => '™',
        "hellip" => '…',
        "mdash" => '—',
        "ndash" => '–',
        "lsquo" => '‘',
        "rsquo" => '’',
        "ldquo" => '“',
        "rdquo" => '”',
        "laquo" => '«',
        "raquo" => '»',
        "middot" => '·',
        "bull" => '•',
        "deg" => '°',
        "euro" => '€',
        "pound" => '£',
        "eacute" => 'é',
        "egrave" => 'è',
        "aacute" => 'á',
        "agrave" => 'à',
        "uuml" => 'ü',
        "ouml" => 'ö',
        "auml" => 'ä',
        "szlig" => 'ß',
        "ccedil" => 'ç',
        "ntilde" => 'ñ',
        _ => return None,
    })
}

/// Decodes named and numeric character references. Unknown or malformed
/// references are left as written.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        match decode_one(after) {
            Some((c, used)) => {
                out.push(c);
                rest = &after[used..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_one(after_amp: &str) -> Option<(char, usize)> {
    let end = after_amp
        .char_indices()
        .take(12)
        .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '#'))
        .map_or(after_amp.len().min(12), |(i, _)| i);
    let body = &after_amp[..end];
    let used = if after_amp[end..].starts_with(';') { end + 1 } else { end };
    if let Some(num) = body.strip_prefix('#') {
        let value = if let Some(hex) = num.strip_prefix(['x', 'X']) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            num.parse::<u32>().ok()?
        };
        let c = char::from_u32(value).filter(|&c| c != '\0').unwrap_or('\u{fffd}');
        return Some((c, used));
    }
    named_entity(body).map(|c| (c, used))
}

// ---------------------------------------------------------------------------
// Region extraction

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn attr<'a>(attrs: &'a [(String, String)], name: &str) -> Option<&'a str> {
    attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
}

fn heading_level(name: &str) -> bool {
    matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6")
}

#[derive(Default)]
struct RegionBuilder {
    doc: TagDocument,
    body: String,
    title: String,
    heading: Option<String>,
    in_head: bool,
    in_title: bool,
    title_done: bool,
}

impl RegionBuilder {
    fn separate(&mut self) {
        if let Some(h) = self.heading.as_mut() {
            h.push(' ');
        } else if self.in_title {
            self.title.push(' ');
        } else {
            self.body.push(' ');
        }
    }

    fn close_heading(&mut self) {
        if let Some(h) = self.heading.take() {
            self.doc.heading_texts.push(collapse_whitespace(&h));
        }
    }

    fn close_title(&mut self) {
        if self.in_title {
            self.in_title = false;
            self.title_done = true;
        }
    }

    fn start(&mut self, name: &str, attrs: &[(String, String)]) {
        match name {
            "head" => self.in_head = true,
            "body" => self.in_head = false,
            "title" => {
                if !self.title_done {
                    self.in_title = true;
                }
            }
            "meta" => {
                if let Some(content) = attr(attrs, "content") {
                    self.doc.meta_texts.push(collapse_whitespace(&decode_entities(content)));
                    if attr(attrs, "name").is_some_and(|n| n.trim().eq_ignore_ascii_case("robots")) {
                        parse_robots_content(content, &mut self.doc.robots_meta);
                    }
                }
            }
            "a" | "area" => {
                if let Some(href) = attr(attrs, "href") {
                    self.doc.outlinks.push(href.trim().to_string());
                }
            }
            _ => {}
        }
        if self.in_head && !HEAD_ELEMENTS.contains(&name) && name != "head" && name != "html" {
            self.in_head = false;
        }
        if heading_level(name) {
            self.close_heading();
            self.heading = Some(String::new());
        }
        if !INLINE_ELEMENTS.contains(&name) {
            self.separate();
        }
    }

    fn end(&mut self, name: &str) {
        match name {
            "head" => self.in_head = false,
            "title" => self.close_title(),
            "body" | "html" => {
                self.close_title();
                self.close_heading();
            }
            n if heading_level(n) => self.close_heading(),
            _ => {}
        }
        if !INLINE_ELEMENTS.contains(&name) {
            self.separate();
        }
    }

    fn text(&mut self, raw: &str) {
        let text = decode_entities(raw);
        if self.in_title {
            self.title.push_str(&text);
        } else if let Some(h) = self.heading.as_mut() {
            h.push_str(&text);
        } else if self.in_head {
            if !text.trim().is_empty() {
                // Stray content ends the head, as browsers do.
                self.in_head = false;
                self.body.push_str(&text);
            }
        } else {
            self.body.push_str(&text);
        }
    }

    fn finish(mut self, url_text: String) -> TagDocument {
        self.close_title();
        self.close_heading();
        self.doc.url_text = url_text;
        self.doc.title_text = collapse_whitespace(&self.title);
        self.doc.body_text = collapse_whitespace(&self.body);
        self.doc
    }
}

/// Parses already-decoded text. Never fails.
pub fn parse_str(src: &str, page_url: &CanonicalUrl) -> TagDocument {
    let mut builder = RegionBuilder::default();
    let mut tokens = Tokenizer::new(src);
    while let Some(token) = tokens.next_token() {
        match token {
            Token::Start { name, attrs } => builder.start(&name, &attrs),
            Token::End { name } => builder.end(&name),
            Token::Text(t) => builder.text(&t),
        }
    }
    builder.finish(page_url.as_str().to_string())
}
