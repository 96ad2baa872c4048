use std::sync::Arc;

use serde_json::{json, Value};

use super::{ChatRequest, Completion, LlmError, Provider};
use crate::http::{HttpRequest, RetryPolicy, Transport, TransportError};

/// Chat-completion provider speaking the common JSON-over-HTTPS wire format:
/// a `messages` array in, `choices[0].message.content` and `usage` out.
pub struct LiveProvider {
    transport: Arc<dyn Transport>,
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl LiveProvider {
    pub fn new(transport: Arc<dyn Transport>, endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            transport,
            endpoint: endpoint.into(),
            api_key,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// The HTTP request for a chat request. The key is not part of the body,
    /// so recorded cassettes stay free of credentials.
    pub fn http_request(&self, request: &ChatRequest) -> HttpRequest {
        let body = json!({
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let http = HttpRequest::post_json(&self.endpoint, &body);
        match &self.api_key {
            Some(key) => http.header("Authorization", format!("Bearer {key}")),
            None => http,
        }
    }
}

fn parse_reply(body: &str) -> Result<Completion, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Provider(format!("bad reply body: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Provider("reply lacks choices[0].message.content".into()))?;
    let count = |field: &str| {
        v.pointer(&format!("/usage/{field}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(Completion {
        text: text.to_string(),
        input_tokens: count("prompt_tokens"),
        output_tokens: count("completion_tokens"),
    })
}

impl Provider for LiveProvider {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let http = self.http_request(request);
        let response = self.retry.run(|attempt| {
            if attempt > 0 {
                log::info!("retrying chat request (attempt {})", attempt + 1);
            }
            match self.transport.execute(&http) {
                Ok(r) if r.is_server_error() => Err((LlmError::Provider(format!("HTTP {}", r.status)), true)),
                Ok(r) if !r.is_success() => {
                    Err((LlmError::Provider(format!("HTTP {}: {}", r.status, r.text())), false))
                }
                Ok(r) => Ok(r),
                Err(e @ TransportError::Network(_)) => Err((LlmError::Provider(e.to_string()), true)),
                Err(e) => Err((LlmError::Provider(e.to_string()), false)),
            }
        })?;
        parse_reply(&response.text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{Cassette, HttpResponse, Interaction, Method};
    use std::sync::atomic::{AtomicU32, Ordering};

    const REPLY: &str = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"main-result/comparison"}}],"usage":{"prompt_tokens":812,"completion_tokens":4}}"#;

    fn provider(transport: Arc<dyn Transport>) -> LiveProvider {
        LiveProvider::new(transport, "https://llm.example/v1/chat/completions", Some("k".into()))
            .with_retry(RetryPolicy::immediate(3))
    }

    #[test]
    fn replays_recorded_cassette() {
        let req = ChatRequest::new("classify", "Table: ...", "frontier-model");
        let probe = provider(Arc::new(Cassette::new(vec![])));
        let http = probe.http_request(&req);
        let cassette = Cassette::new(vec![Interaction {
            method: Method::Post,
            url: http.url.clone(),
            body_sha256: http.body_digest(),
            status: 200,
            body: Some(REPLY.into()),
            body_base64: None,
        }]);
        let c = provider(Arc::new(cassette)).complete(&req).unwrap();
        assert_eq!(c.text, "main-result/comparison");
        assert_eq!((c.input_tokens, c.output_tokens), (812, 4));
        // a different prompt is not in the recording
        let other = ChatRequest::new("classify", "Table: other", "frontier-model");
        let cassette = Cassette::new(vec![]);
        assert!(provider(Arc::new(cassette)).complete(&other).is_err());
    }

    struct Flaky {
        failures: u32,
        status: u16,
        seen: AtomicU32,
    }

    impl Transport for Flaky {
        fn execute(&self, _r: &HttpRequest) -> Result<HttpResponse, TransportError> {
            let n = self.seen.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Ok(HttpResponse {
                    status: self.status,
                    body: b"err".to_vec(),
                })
            } else {
                Ok(HttpResponse {
                    status: 200,
                    body: REPLY.as_bytes().to_vec(),
                })
            }
        }
    }

    #[test]
    fn retries_server_errors_three_times() {
        let t = Arc::new(Flaky {
            failures: 3,
            status: 503,
            seen: AtomicU32::new(0),
        });
        assert!(provider(t.clone()).complete(&ChatRequest::new("s", "u", "m")).is_ok());
        assert_eq!(t.seen.load(Ordering::SeqCst), 4);

        let t = Arc::new(Flaky {
            failures: 4,
            status: 500,
            seen: AtomicU32::new(0),
        });
        assert!(matches!(
            provider(t.clone()).complete(&ChatRequest::new("s", "u", "m")),
            Err(LlmError::Provider(_))
        ));
        assert_eq!(t.seen.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Arc::new(Flaky {
            failures: 1,
            status: 401,
            seen: AtomicU32::new(0),
        });
        assert!(provider(t.clone()).complete(&ChatRequest::new("s", "u", "m")).is_err());
        assert_eq!(t.seen.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn default_backoff_schedule() {
        let p = RetryPolicy::default();
        let secs: Vec<u64> = (1..=3).map(|r| p.delay_before_retry(r).as_secs()).collect();
        assert_eq!(secs, vec![1, 2, 4]);
    }
}
