//! Minimal blocking HTTP layer shared by the paper source and the chat provider.
//!
//! Everything above this module talks to a [`Transport`], so tests can swap the
//! live client for a recorded [`Cassette`] and get byte-identical replays.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(serde_json::to_vec(body).expect("json value serializes")),
        }
    }

    pub fn header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    /// Hex SHA-256 of the request body, used to tell apart POSTs to one URL.
    pub fn body_digest(&self) -> Option<String> {
        self.body.as_ref().map(|b| hex::encode(Sha256::digest(b)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn is_server_error(&self) -> bool {
        (500..600).contains(&self.status)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("network failure: {0}")]
    Network(String),
    #[error("no recorded interaction for {method:?} {url}")]
    NotRecorded { method: Method, url: String },
    #[error("live network access is disabled")]
    Offline,
    #[error("cassette error: {0}")]
    Cassette(String),
}

pub trait Transport: Send + Sync {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Live transport backed by a blocking reqwest client.
pub struct LiveTransport {
    client: reqwest::blocking::Client,
}

impl LiveTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("league/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for LiveTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name.as_str(), value.as_str());
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .bytes()
            .map_err(|e| TransportError::Network(e.to_string()))?
            .to_vec();
        Ok(HttpResponse { status, body })
    }
}

/// Transport that refuses every request; used under `--offline`.
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn execute(&self, _request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        Err(TransportError::Offline)
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Interaction {
    pub method: Method,
    pub url: String,
    /// SHA-256 of the request body; absent for GETs or when any body should match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_sha256: Option<String>,
    pub status: u16,
    /// UTF-8 response body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    /// Binary response body, standard base64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_base64: Option<String>,
}

impl Interaction {
    fn matches(&self, request: &HttpRequest) -> bool {
        if self.method != request.method || self.url != request.url {
            return false;
        }
        match &self.body_sha256 {
            None => true,
            Some(digest) => request.body_digest().as_deref() == Some(digest.as_str()),
        }
    }

    fn response(&self) -> Result<HttpResponse, TransportError> {
        let body = match (&self.body, &self.body_base64) {
            (_, Some(b64)) => base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| TransportError::Cassette(format!("bad base64 body: {e}")))?,
            (Some(text), None) => text.clone().into_bytes(),
            (None, None) => Vec::new(),
        };
        Ok(HttpResponse {
            status: self.status,
            body,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CassetteFile {
    pub interactions: Vec<Interaction>,
}

/// Replays recorded interactions. Repeated identical requests are served in
/// recording order, and the last matching interaction is reused once the
/// earlier ones are consumed.
pub struct Cassette {
    interactions: Vec<Interaction>,
    served: Mutex<Vec<usize>>,
}

impl Cassette {
    pub fn new(interactions: Vec<Interaction>) -> Self {
        let n = interactions.len();
        Self {
            interactions,
            served: Mutex::new(vec![0; n]),
        }
    }

    pub fn load(path: &Path) -> Result<Self, TransportError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| TransportError::Cassette(format!("{}: {e}", path.display())))?;
        let file: CassetteFile =
            serde_json::from_str(&text).map_err(|e| TransportError::Cassette(format!("{}: {e}", path.display())))?;
        Ok(Self::new(file.interactions))
    }
}

impl Transport for Cassette {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let candidates: Vec<usize> = self
            .interactions
            .iter()
            .enumerate()
            .filter(|(_, i)| i.matches(request))
            .map(|(idx, _)| idx)
            .collect();
        let Some(&last) = candidates.last() else {
            return Err(TransportError::NotRecorded {
                method: request.method,
                url: request.url.clone(),
            });
        };
        let mut served = self.served.lock().expect("cassette lock poisoned");
        let pick = candidates.iter().copied().find(|&idx| served[idx] == 0).unwrap_or(last);
        served[pick] += 1;
        self.interactions[pick].response()
    }
}

/// Wraps a transport and records every exchange so it can be saved as a cassette.
pub struct Recorder<T> {
    inner: T,
    log: Mutex<Vec<Interaction>>,
}

impl<T: Transport> Recorder<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn interactions(&self) -> Vec<Interaction> {
        self.log.lock().expect("recorder lock poisoned").clone()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let file = CassetteFile {
            interactions: self.interactions(),
        };
        std::fs::write(path, serde_json::to_vec_pretty(&file)?)
    }
}

impl<T: Transport> Transport for Recorder<T> {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.execute(request)?;
        let (body, body_base64) = match std::str::from_utf8(&response.body) {
            Ok(text) => (Some(text.to_owned()), None),
            Err(_) => (
                None,
                Some(base64::engine::general_purpose::STANDARD.encode(&response.body)),
            ),
        };
        self.log.lock().expect("recorder lock poisoned").push(Interaction {
            method: request.method,
            url: request.url.clone(),
            body_sha256: request.body_digest(),
            status: response.status,
            body,
            body_base64,
        });
        Ok(response)
    }
}

/// Exponential backoff: the first retry waits `base_delay`, each later one doubles it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1))
    }

    /// Runs `op` until it succeeds, fails permanently, or retries run out.
    /// `op` returns `Err((err, retryable))`.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Result<T, (E, bool)>) -> Result<T, E> {
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Ok(value) => return Ok(value),
                Err((err, retryable)) => {
                    if !retryable || attempt >= self.max_retries {
                        return Err(err);
                    }
                    attempt += 1;
                    let delay = self.delay_before_retry(attempt);
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                }
            }
        }
    }
}

/// Enforces a minimum spacing between requests and keeps them one at a time.
pub struct Politeness {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl Politeness {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            last: Mutex::new(None),
        }
    }

    /// Runs `op` while holding the slot; waits out the interval first.
    pub fn run<T>(&self, op: impl FnOnce() -> T) -> T {
        let mut last = self.last.lock().expect("politeness lock poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                thread::sleep(self.min_interval - elapsed);
            }
        }
        let out = op();
        *last = Some(Instant::now());
        out
    }
}

pub fn cassette_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json"))
}
