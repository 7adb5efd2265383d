//! Transports move bytes; the fetcher on top of them owns redirects, robots
//! and politeness.

use std::io::Read;
use std::sync::Mutex;
use std::time::Duration;

use crate::canonical::CanonicalUrl;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestLimits {
    pub max_body_bytes: usize,
    pub timeout: Duration,
}

/// A single HTTP exchange, redirects not followed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: Option<String>,
    pub location: Option<String>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout,
    TooLarge,
    Other(String),
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure>;
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure> {
        (**self).get(url, limits)
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure> {
        (**self).get(url, limits)
    }
}

/// Records every URL requested through it, then delegates.
pub struct RecordingTransport<T> {
    inner: T,
    requests: Mutex<Vec<CanonicalUrl>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<CanonicalUrl> {
        self.requests.lock().expect("spy lock poisoned").clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().expect("spy lock poisoned").len()
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure> {
        self.requests
            .lock()
            .expect("spy lock poisoned")
            .push(url.clone());
        self.inner.get(url, limits)
    }
}

/// Blocking HTTP over `ureq`. Redirects are returned to the caller, never
/// followed here.
pub struct LiveTransport {
    user_agent: String,
    timeout: Duration,
    agent: ureq::Agent,
}

impl LiveTransport {
    pub fn new(user_agent: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent(user_agent)
            .build();
        Self {
            user_agent: user_agent.to_string(),
            timeout,
            agent: config.into(),
        }
    }

    pub fn user_agent(&self) -> &str {
        &self.user_agent
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }
}

impl Transport for LiveTransport {
    fn get(&self, url: &CanonicalUrl, limits: &RequestLimits) -> Result<Response, TransportFailure> {
        let response = self.agent.get(url.as_str()).call().map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportFailure::Timeout,
            other => TransportFailure::Other(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let header = |name: &str| {
            response
                .headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let content_type = header("content-type");
        let location = header("location");

        let mut body = Vec::new();
        let mut reader = response
            .into_body()
            .into_reader()
            .take(limits.max_body_bytes as u64 + 1);
        reader.read_to_end(&mut body).map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut {
                TransportFailure::Timeout
            } else {
                TransportFailure::Other(e.to_string())
            }
        })?;
        if body.len() > limits.max_body_bytes {
            return Err(TransportFailure::TooLarge);
        }
        Ok(Response {
            status,
            content_type,
            location,
            body,
        })
    }
}
