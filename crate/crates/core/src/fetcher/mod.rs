//! Page downloading: robots.txt enforcement, per-host politeness, redirect
//! following and body size limits over a pluggable [`Transport`].

mod politeness;
mod robots;
mod transport;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, SystemTime};

use serde::Serialize;

pub use politeness::{Clock, FakeClock, Politeness, SystemClock};
pub use robots::{product_token, RobotsPolicy};
pub use transport::{
    LiveTransport, RecordingTransport, RequestLimits, Response, Transport, TransportFailure,
};

use crate::canonical::{canonicalize, CanonicalUrl};

pub const DEFAULT_USER_AGENT: &str = "FocusCrawl/0.1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FetchConfig {
    pub max_body_bytes: usize,
    pub timeout: Duration,
    pub redirect_limit: u32,
    pub min_delay: Duration,
    pub user_agent: String,
    pub respect_robots_txt: bool,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            max_body_bytes: 2 * 1024 * 1024,
            timeout: Duration::from_secs(10),
            redirect_limit: 5,
            min_delay: Duration::from_millis(500),
            user_agent: DEFAULT_USER_AGENT.to_string(),
            respect_robots_txt: true,
        }
    }
}

impl FetchConfig {
    pub fn request_limits(&self) -> RequestLimits {
        RequestLimits {
            max_body_bytes: self.max_body_bytes,
            timeout: self.timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FetchStatus {
    Ok,
    HttpError(u16),
    Timeout,
    TooLarge,
    RobotsDenied,
    TransportError(String),
}

impl FetchStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, FetchStatus::Ok)
    }
}

#[derive(Debug, Clone)]
pub struct FetchResult {
    pub url: CanonicalUrl,
    /// Where the body actually came from after redirects.
    pub final_url: CanonicalUrl,
    pub status: FetchStatus,
    /// Present iff `status` is `Ok`.
    pub body: Option<Vec<u8>>,
    pub content_type: Option<String>,
    pub redirects: u32,
    pub fetched_at: SystemTime,
}

impl FetchResult {
    fn failed(url: &CanonicalUrl, final_url: CanonicalUrl, status: FetchStatus, redirects: u32) -> Self {
        Self {
            url: url.clone(),
            final_url,
            status,
            body: None,
            content_type: None,
            redirects,
            fetched_at: SystemTime::now(),
        }
    }
}

type RobotsSlot = Arc<OnceLock<Arc<RobotsPolicy>>>;

/// Shared by all fetch workers of a crawl.
pub struct Fetcher {
    transport: Arc<dyn Transport>,
    config: FetchConfig,
    politeness: Politeness,
    robots: Mutex<HashMap<String, RobotsSlot>>,
}

impl Fetcher {
    pub fn new(transport: Arc<dyn Transport>, config: FetchConfig) -> Self {
        Self::with_clock(transport, config, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(transport: Arc<dyn Transport>, config: FetchConfig, clock: Arc<dyn Clock>) -> Self {
        let politeness = Politeness::new(config.min_delay, clock);
        Self {
            transport,
            config,
            politeness,
            robots: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &FetchConfig {
        &self.config
    }

    pub fn politeness(&self) -> &Politeness {
        &self.politeness
    }

    /// Robots policy for the origin of `url`, fetched at most once per
    /// origin. Any failure to obtain robots.txt yields allow-all.
    pub fn consult_robots(&self, url: &CanonicalUrl) -> Arc<RobotsPolicy> {
        let origin = url.origin();
        let slot = {
            let mut cache = self.robots.lock().expect("robots cache poisoned");
            cache.entry(origin.clone()).or_default().clone()
        };
        slot.get_or_init(|| Arc::new(self.load_robots(&origin, url.host())))
            .clone()
    }

    fn load_robots(&self, origin: &str, host: &str) -> RobotsPolicy {
        let robots_url = match canonicalize(&format!("{origin}/robots.txt"), None) {
            Ok(u) => u,
            Err(_) => return RobotsPolicy::allow_all(host),
        };
        self.politeness.wait(host);
        match self.transport.get(&robots_url, &self.config.request_limits()) {
            Ok(resp) if (200..300).contains(&resp.status) => {
                let text = String::from_utf8_lossy(&resp.body);
                RobotsPolicy::parse(host, &text, &self.config.user_agent)
            }
            Ok(resp) => {
                tracing::debug!(%robots_url, status = resp.status, "no robots.txt, allowing all");
                RobotsPolicy::allow_all(host)
            }
            Err(e) => {
                tracing::warn!(%robots_url, error = ?e, "robots.txt fetch failed, allowing all");
                RobotsPolicy::allow_all(host)
            }
        }
    }

    pub fn is_allowed(&self, url: &CanonicalUrl) -> bool {
        !self.config.respect_robots_txt || self.consult_robots(url).allows(&url.path_and_query())
    }

    pub fn politeness_wait(&self, host: &str) -> Duration {
        self.politeness.wait(host)
    }

    /// Downloads `url`, following up to `redirect_limit` redirects. Remote
    /// failures are reported in the result status, never as errors.
    pub fn fetch(&self, url: &CanonicalUrl) -> FetchResult {
        let limits = self.config.request_limits();
        let mut current = url.clone();
        let mut redirects = 0;
        loop {
            if !self.is_allowed(&current) {
                return FetchResult::failed(url, current, FetchStatus::RobotsDenied, redirects);
            }
            self.politeness.wait(current.host());
            let resp = match self.transport.get(&current, &limits) {
                Ok(r) => r,
                Err(TransportFailure::Timeout) => {
                    return FetchResult::failed(url, current, FetchStatus::Timeout, redirects)
                }
                Err(TransportFailure::TooLarge) => {
                    return FetchResult::failed(url, current, FetchStatus::TooLarge, redirects)
                }
                Err(TransportFailure::Other(msg)) => {
                    return FetchResult::failed(url, current, FetchStatus::TransportError(msg), redirects)
                }
            };

            if (300..400).contains(&resp.status) {
                if let Some(location) = resp.location.as_deref() {
                    if redirects >= self.config.redirect_limit {
                        let msg = format!("more than {} redirects", self.config.redirect_limit);
                        return FetchResult::failed(url, current, FetchStatus::TransportError(msg), redirects);
                    }
                    match canonicalize(location, Some(&current)) {
                        Ok(next) => {
                            redirects += 1;
                            current = next;
                            continue;
                        }
                        Err(e) => {
                            let msg = format!("bad redirect target: {e}");
                            return FetchResult::failed(url, current, FetchStatus::TransportError(msg), redirects);
                        }
                    }
                }
            }
            if !(200..300).contains(&resp.status) {
                return FetchResult::failed(url, current, FetchStatus::HttpError(resp.status), redirects);
            }
            if resp.body.len() > limits.max_body_bytes {
                return FetchResult::failed(url, current, FetchStatus::TooLarge, redirects);
            }
            return FetchResult {
                url: url.clone(),
                final_url: current,
                status: FetchStatus::Ok,
                body: Some(resp.body),
                content_type: resp.content_type,
                redirects,
                fetched_at: SystemTime::now(),
            };
        }
    }
}

impl std::fmt::Debug for Fetcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fetcher")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal in-memory transport for unit tests.
    #[derive(Default)]
    struct MapTransport {
        pages: HashMap<String, Response>,
    }

    impl MapTransport {
        fn page(mut self, url: &str, body: &str) -> Self {
            self.pages.insert(
                url.to_string(),
                Response {
                    status: 200,
                    content_type: Some("text/html".into()),
                    location: None,
                    body: body.as_bytes().to_vec(),
                },
            );
            self
        }

        fn redirect(mut self, from: &str, to: &str) -> Self {
            self.pages.insert(
                from.to_string(),
                Response {
                    status: 302,
                    content_type: None,
                    location: Some(to.to_string()),
                    body: Vec::new(),
                },
            );
            self
        }
    }

    impl Transport for MapTransport {
        fn get(&self, url: &CanonicalUrl, _: &RequestLimits) -> Result<Response, TransportFailure> {
            Ok(self.pages.get(url.as_str()).cloned().unwrap_or(Response {
                status: 404,
                content_type: None,
                location: None,
                body: Vec::new(),
            }))
        }
    }

    fn url(s: &str) -> CanonicalUrl {
        canonicalize(s, None).unwrap()
    }

    fn fetcher(t: MapTransport, config: FetchConfig) -> (Arc<RecordingTransport<MapTransport>>, Fetcher) {
        let spy = Arc::new(RecordingTransport::new(t));
        let f = Fetcher::with_clock(spy.clone(), config, Arc::new(FakeClock::new()));
        (spy, f)
    }

    fn no_delay() -> FetchConfig {
        FetchConfig {
            min_delay: Duration::ZERO,
            ..FetchConfig::default()
        }
    }

    #[test]
    fn fetches_exact_bytes() {
        let (_, f) = fetcher(MapTransport::default().page("http://a.test/p", "<p>hi</p>"), no_delay());
        let r = f.fetch(&url("http://a.test/p"));
        assert_eq!(r.status, FetchStatus::Ok);
        assert_eq!(r.body.as_deref(), Some(&b"<p>hi</p>"[..]));
        assert_eq!(r.content_type.as_deref(), Some("text/html"));
    }

    #[test]
    fn robots_denied_path_is_never_requested() {
        let t = MapTransport::default()
            .page("http://a.test/robots.txt", "User-agent: *\nDisallow: /private")
            .page("http://a.test/private/x", "secret");
        let (spy, f) = fetcher(t, no_delay());
        let r = f.fetch(&url("http://a.test/private/x"));
        assert_eq!(r.status, FetchStatus::RobotsDenied);
        assert!(r.body.is_none());
        let requested: Vec<_> = spy.requests().iter().map(|u| u.to_string()).collect();
        assert_eq!(requested, ["http://a.test/robots.txt"]);
    }

    #[test]
    fn robots_fetched_once_per_origin() {
        let t = MapTransport::default()
            .page("http://a.test/1", "1")
            .page("http://a.test/2", "2");
        let (spy, f) = fetcher(t, no_delay());
        f.fetch(&url("http://a.test/1"));
        f.fetch(&url("http://a.test/2"));
        let robots = spy
            .requests()
            .iter()
            .filter(|u| u.path() == "/robots.txt")
            .count();
        assert_eq!(robots, 1);
        assert!(!f.consult_robots(&url("http://a.test/")).fetched);
    }

    #[test]
    fn missing_robots_means_allow_all() {
        let (_, f) = fetcher(MapTransport::default(), no_delay());
        let policy = f.consult_robots(&url("http://a.test/"));
        assert!(policy.disallow_prefixes.is_empty());
        assert!(f.is_allowed(&url("http://a.test/anything")));
    }

    #[test]
    fn robots_can_be_ignored() {
        let t = MapTransport::default()
            .page("http://a.test/robots.txt", "User-agent: *\nDisallow: /")
            .page("http://a.test/x", "x");
        let config = FetchConfig {
            respect_robots_txt: false,
            ..no_delay()
        };
        let (spy, f) = fetcher(t, config);
        assert!(f.fetch(&url("http://a.test/x")).status.is_ok());
        assert_eq!(spy.request_count(), 1);
    }

    #[test]
    fn follows_redirects_and_recanonicalizes() {
        let t = MapTransport::default()
            .redirect("http://a.test/old", "../new#frag")
            .page("http://a.test/new", "moved");
        let (_, f) = fetcher(t, no_delay());
        let r = f.fetch(&url("http://a.test/old"));
        assert_eq!(r.status, FetchStatus::Ok);
        assert_eq!(r.final_url.as_str(), "http://a.test/new");
        assert_eq!(r.redirects, 1);
    }

    // Chain r0 -> r1 -> ... -> rN -> page. With limit 5, N = 5 redirects is
    // fine (6 requests), N = 6 is one too many.
    fn chain(n: usize) -> MapTransport {
        let mut t = MapTransport::default();
        for i in 0..n {
            t = t.redirect(&format!("http://a.test/r{i}"), &format!("/r{}", i + 1));
        }
        t.page(&format!("http://a.test/r{n}"), "end")
    }

    #[test]
    fn redirect_limit() {
        let (_, f) = fetcher(chain(5), no_delay());
        let r = f.fetch(&url("http://a.test/r0"));
        assert_eq!(r.status, FetchStatus::Ok);
        assert_eq!(r.redirects, 5);

        let (spy, f) = fetcher(chain(6), no_delay());
        let r = f.fetch(&url("http://a.test/r0"));
        assert!(matches!(r.status, FetchStatus::TransportError(_)));
        assert!(r.body.is_none());
        // robots.txt plus r0..r5
        assert_eq!(spy.request_count(), 7);
    }

    #[test]
    fn redirect_loop_terminates() {
        let t = MapTransport::default()
            .redirect("http://a.test/a", "/b")
            .redirect("http://a.test/b", "/a");
        let (_, f) = fetcher(t, no_delay());
        assert!(matches!(
            f.fetch(&url("http://a.test/a")).status,
            FetchStatus::TransportError(_)
        ));
    }

    #[test]
    fn redirect_into_denied_path_is_not_followed() {
        let t = MapTransport::default()
            .page("http://a.test/robots.txt", "User-agent: *\nDisallow: /private")
            .redirect("http://a.test/open", "/private/x")
            .page("http://a.test/private/x", "secret");
        let (spy, f) = fetcher(t, no_delay());
        assert_eq!(f.fetch(&url("http://a.test/open")).status, FetchStatus::RobotsDenied);
        assert!(spy.requests().iter().all(|u| !u.path().starts_with("/private")));
    }

    #[test]
    fn http_errors_and_oversize_bodies() {
        let big = "x".repeat(100);
        let t = MapTransport::default().page("http://a.test/big", &big);
        let config = FetchConfig {
            max_body_bytes: 10,
            ..no_delay()
        };
        let (_, f) = fetcher(t, config);
        let r = f.fetch(&url("http://a.test/big"));
        assert_eq!(r.status, FetchStatus::TooLarge);
        assert!(r.body.is_none());
        assert_eq!(f.fetch(&url("http://a.test/missing")).status, FetchStatus::HttpError(404));
    }

    #[test]
    fn same_host_requests_are_spaced_on_fake_clock() {
        let mut t = MapTransport::default();
        for i in 0..10 {
            t = t.page(&format!("http://a.test/{i}"), "x");
        }
        let clock = Arc::new(FakeClock::new());
        let config = FetchConfig {
            min_delay: Duration::from_millis(100),
            respect_robots_txt: false,
            ..FetchConfig::default()
        };
        let f = Fetcher::with_clock(Arc::new(t), config, clock.clone());
        for i in 0..10 {
            f.fetch(&url(&format!("http://a.test/{i}")));
        }
        assert!(clock.now() >= Duration::from_millis(900));
    }
}
