use crate::canonical::CanonicalUrl;
use crate::fetcher::{RequestLimits, Response, Transport, TransportFailure};

/// Wraps a transport and answers every URL under `prefix` with a generated
/// page that links one level deeper and to the next "calendar" page, so the
/// space under the prefix is unbounded.
pub struct InfiniteTrapTransport<T> {
    inner: T,
    prefix: String,
}

impl<T: Transport> InfiniteTrapTransport<T> {
    pub fn new(inner: T, prefix: &str) -> Self {
        Self {
            inner,
            prefix: prefix.to_string(),
        }
    }
}

impl<T: Transport> Transport for InfiniteTrapTransport<T> {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure> {
        if !url.path().starts_with(&self.prefix) {
            return self.inner.get(url, limits);
        }
        let page: u64 = url
            .query()
            .and_then(|q| q.strip_prefix("page="))
            .and_then(|n| n.parse().ok())
            .unwrap_or(0);
        let path = url.path().trim_end_matches('/');
        let html = format!(
            "<html><head><title>Archive {page}</title></head><body>\
             <a href=\"{path}/more/\">deeper</a> \
             <a href=\"{path}/?page={next}\">next</a></body></html>",
            next = page + 1
        );
        Ok(Response {
            status: 200,
            content_type: Some("text/html".into()),
            location: None,
            body: html.into_bytes(),
        })
    }
}
