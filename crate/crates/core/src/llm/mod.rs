//! Provider-agnostic chat completion with a usage ledger.
//!
//! Callers build a [`ChatRequest`], hand it to a [`Gateway`] and get raw text
//! back. The gateway enforces the input cap and concurrency limit and records
//! one [`UsageEntry`] per call.

mod cost;
mod json;
mod live;
mod mock;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cost::{estimate_cost, Cost, Price};
pub use json::{parse_json_payload, JSON_ONLY_REMINDER};
pub use live::LiveProvider;
pub use mock::{ScriptEntry, ScriptMatch, ScriptedMock};

pub const DEFAULT_TEMPERATURE: f64 = 0.3;
pub const DEFAULT_INPUT_TOKEN_CAP: usize = 128_000;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider error: {0}")]
    Provider(String),
    #[error("mock script has no entry for request {fingerprint}")]
    ScriptMiss { fingerprint: String },
    #[error("prompt has {tokens} tokens, over the cap of {cap}")]
    ContextOverflow { tokens: usize, cap: usize },
    #[error("no JSON object found in response")]
    NoJsonFound,
    #[error("JSON response lacks keys {0:?}")]
    MissingKeys(Vec<String>),
}

impl LlmError {
    /// JSON-shape failures earn one re-ask; everything else is final.
    pub fn is_shape_error(&self) -> bool {
        matches!(self, LlmError::NoJsonFound | LlmError::MissingKeys(_))
    }
}

/// Whitespace token count. Used for the input cap and by the mock provider.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_fingerprint: String,
}

impl ChatRequest {
    pub fn new(
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
        model_name: impl Into<String>,
    ) -> Self {
        let mut req = Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            model_name: model_name.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            request_fingerprint: String::new(),
        };
        req.refresh_fingerprint();
        req
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        assert!(
            (0.0..=2.0).contains(&temperature),
            "temperature {temperature} outside [0, 2]"
        );
        self.temperature = temperature;
        self.refresh_fingerprint();
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        assert!(n >= 1, "max_output_tokens must be positive");
        self.max_output_tokens = n;
        self
    }

    /// Appends text to the user prompt (used for re-asks).
    pub fn with_appended(mut self, extra: &str) -> Self {
        self.user_prompt.push_str(extra);
        self.refresh_fingerprint();
        self
    }

    pub fn fingerprint_of(system: &str, user: &str, model: &str, temperature: f64) -> String {
        let payload = serde_json::json!([system, user, model, temperature]);
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }

    fn refresh_fingerprint(&mut self) {
        self.request_fingerprint = Self::fingerprint_of(
            &self.system_prompt,
            &self.user_prompt,
            &self.model_name,
            self.temperature,
        );
    }

    pub fn input_tokens(&self) -> usize {
        count_tokens(&self.system_prompt) + count_tokens(&self.user_prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub fingerprint: String,
    pub model_name: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Seconds; zero for entries replayed from the cache.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub requests: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Append-only log of provider usage. Totals are recomputed from the entries.
#[derive(Debug, Default)]
pub struct UsageLedger {
    entries: Mutex<Vec<UsageEntry>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&self, entry: UsageEntry) {
        debug_assert!(entry.wall_time >= 0.0);
        self.entries.lock().expect("ledger lock poisoned").push(entry);
    }

    pub fn entries(&self) -> Vec<UsageEntry> {
        self.entries.lock().expect("ledger lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("ledger lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn totals(&self) -> UsageTotals {
        totals_of(&self.entries())
    }
}

pub fn totals_of(entries: &[UsageEntry]) -> UsageTotals {
    entries.iter().fold(UsageTotals::default(), |t, e| UsageTotals {
        requests: t.requests + 1,
        input_tokens: t.input_tokens + e.input_tokens,
        output_tokens: t.output_tokens + e.output_tokens,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    LiveHttp,
    ScriptedMock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderProfile {
    pub provider_kind: ProviderKind,
    /// Chat-completion URL; live providers only.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Mock script path; scripted mocks only.
    #[serde(default)]
    pub script: Option<String>,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default)]
    pub price_per_million_input: Price,
    #[serde(default)]
    pub price_per_million_output: Price,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_input_cap")]
    pub input_token_cap: usize,
    #[serde(default = "default_max_output")]
    pub max_output_tokens: u32,
}

fn default_model() -> String {
    "mock".into()
}
fn default_concurrency() -> usize {
    4
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_input_cap() -> usize {
    DEFAULT_INPUT_TOKEN_CAP
}
fn default_max_output() -> u32 {
    DEFAULT_MAX_OUTPUT_TOKENS
}

impl ProviderProfile {
    pub fn mock(script: impl Into<String>) -> Self {
        Self {
            provider_kind: ProviderKind::ScriptedMock,
            endpoint: None,
            script: Some(script.into()),
            model_name: default_model(),
            price_per_million_input: Price::ZERO,
            price_per_million_output: Price::ZERO,
            max_concurrent: default_concurrency(),
            temperature: DEFAULT_TEMPERATURE,
            input_token_cap: DEFAULT_INPUT_TOKEN_CAP,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_concurrent < 1 {
            return Err("max_concurrent must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_output_tokens < 1 {
            return Err("max_output_tokens must be at least 1".into());
        }
        match self.provider_kind {
            ProviderKind::LiveHttp if self.endpoint.is_none() => Err("live provider needs an endpoint".into()),
            ProviderKind::ScriptedMock if self.script.is_none() => Err("scripted mock needs a script".into()),
            _ => Ok(()),
        }
    }

    /// A request carrying this profile's model and sampling settings.
    pub fn request(&self, system: impl Into<String>, user: impl Into<String>) -> ChatRequest {
        ChatRequest::new(system, user, self.model_name.clone())
            .with_temperature(self.temperature)
            .with_max_output_tokens(self.max_output_tokens)
    }
}

/// Raw provider output.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

pub trait Provider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError>;
}

/// Counting semaphore bounding in-flight provider calls.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slots lock poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("slots lock poisoned");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slots lock poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// A provider plus its profile, ledger and concurrency cap.
pub struct Gateway {
    provider: Box<dyn Provider>,
    profile: ProviderProfile,
    ledger: UsageLedger,
    calls: AtomicU64,
    slots: Slots,
}

impl Gateway {
    pub fn new(provider: Box<dyn Provider>, profile: ProviderProfile) -> Self {
        let slots = Slots {
            free: Mutex::new(profile.max_concurrent.max(1)),
            cv: Condvar::new(),
        };
        Self {
            provider,
            profile,
            ledger: UsageLedger::new(),
            calls: AtomicU64::new(0),
            slots,
        }
    }

    pub fn profile(&self) -> &ProviderProfile {
        &self.profile
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    /// Number of requests that reached the provider.
    pub fn provider_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, system: impl Into<String>, user: impl Into<String>) -> ChatRequest {
        self.profile.request(system, user)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<(String, UsageEntry), LlmError> {
        let tokens = request.input_tokens();
        if tokens > self.profile.input_token_cap {
            return Err(LlmError::ContextOverflow {
                tokens,
                cap: self.profile.input_token_cap,
            });
        }
        let _slot = self.slots.acquire();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let completion = self.provider.complete(request)?;
        let entry = UsageEntry {
            fingerprint: request.request_fingerprint.clone(),
            model_name: request.model_name.clone(),
            input_tokens: completion.input_tokens,
            output_tokens: completion.output_tokens,
            wall_time: started.elapsed().as_secs_f64(),
        };
        self.ledger.append(entry.clone());
        Ok((completion.text, entry))
    }

    /// Completes and parses a JSON object holding `required` keys. A shape
    /// failure gets exactly one re-ask with a JSON-only reminder. Usage is
    /// returned whether or not parsing succeeded.
    pub fn complete_json(
        &self,
        request: &ChatRequest,
        required: &[&str],
    ) -> (
        Result<serde_json::Map<String, serde_json::Value>, LlmError>,
        Vec<UsageEntry>,
    ) {
        let mut usage = Vec::new();
        let mut request = request.clone();
        for attempt in 0..2 {
            let text = match self.complete(&request) {
                Ok((text, entry)) => {
                    usage.push(entry);
                    text
                }
                Err(e) => return (Err(e), usage),
            };
            match parse_json_payload(&text, required) {
                Err(e) if e.is_shape_error() && attempt == 0 => {
                    log::warn!("re-asking after malformed JSON: {e}");
                    request = request.with_appended(JSON_ONLY_REMINDER);
                }
                outcome => return (outcome, usage),
            }
        }
        unreachable!("loop returns on the second attempt")
    }

    pub fn estimated_cost(&self) -> Cost {
        estimate_cost(&self.ledger.entries(), &self.profile)
    }
}
