//! Chat-completion client for OpenAI-compatible endpoints.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use impute_forge_core::backend::{BackendError, BackendKind};
use impute_forge_core::{BackendConfig, CompletionExchange, Completer, PromptRequest};
use rand::Rng;
use serde_json::{json, Value};

const BACKOFF_FACTOR: u64 = 2;
const JITTER: f64 = 0.2;

pub struct HttpBackend {
    cfg: BackendConfig,
    key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable; fails
    /// before any network activity when it is unset or empty.
    pub fn new(cfg: &BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        if cfg.kind != BackendKind::Http {
            return Err(BackendError::InvalidConfig("backend kind is not http".into()));
        }
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::AuthMissing(cfg.api_key_env.clone()))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            cfg: cfg.clone(),
            key,
            agent,
        })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
            "messages": [{"role": "user", "content": prompt}],
        })
    }

    fn once(&self, body: &Value) -> Result<String, Attempt> {
        let resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Attempt::Timeout),
            Err(e) => return Err(Attempt::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transport(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 => Err(Attempt::RateLimited),
            500..=599 => Err(Attempt::Status(status, text)),
            _ => Err(Attempt::Fatal(BackendError::Http {
                status,
                attempts: 1,
                body: text,
            })),
        }
    }
}

enum Attempt {
    Timeout,
    RateLimited,
    Status(u16, String),
    Transport(String),
    Fatal(BackendError),
}

/// Sleep before retry `retry` (0-based): base · 2^retry, scaled by a
/// uniform factor in [0.8, 1.2].
pub fn backoff_delay(base_ms: u64, retry: u32, unit: f64) -> u64 {
    let nominal = base_ms.saturating_mul(BACKOFF_FACTOR.saturating_pow(retry));
    (nominal as f64 * (1.0 - JITTER + 2.0 * JITTER * unit)).round() as u64
}

/// First choice's message text of a chat-completion response.
pub fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::MalformedProviderResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(String::from)
        .ok_or_else(|| BackendError::MalformedProviderResponse("no choices[0].message.content".into()))
}

impl Completer for HttpBackend {
    fn mode(&self) -> &'static str {
        "http"
    }

    fn complete(&self, req: &PromptRequest) -> Result<CompletionExchange, BackendError> {
        let body = self.request_body(&req.prompt.text);
        let start = Instant::now();
        let mut backoff = Vec::new();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let last = attempts > self.cfg.max_retries;
            match self.once(&body) {
                Ok(text) => {
                    return Ok(CompletionExchange {
                        prompt_text: req.prompt.text.clone(),
                        response_text: extract_content(&text)?,
                        latency_ms: start.elapsed().as_millis() as u64,
                        attempt_count: attempts,
                        estimated_prompt_tokens: req.prompt.estimated_tokens,
                        backoff_ms: backoff,
                    })
                }
                Err(Attempt::Fatal(BackendError::Http { status, body, .. })) => {
                    return Err(BackendError::Http { status, attempts, body })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(e) if last => {
                    return Err(match e {
                        Attempt::Timeout => BackendError::Timeout { attempts },
                        Attempt::RateLimited => BackendError::RateLimited { attempts },
                        Attempt::Status(status, body) => BackendError::Http { status, attempts, body },
                        Attempt::Transport(message) => BackendError::Transport { attempts, message },
                        Attempt::Fatal(e) => e,
                    })
                }
                Err(_) => {
                    let delay = backoff_delay(self.cfg.backoff_base_ms, attempts - 1, rand::thread_rng().gen());
                    backoff.push(delay);
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }

    /// Runs up to `max_in_flight` requests at a time.
    fn complete_batch(&self, reqs: &[PromptRequest]) -> Vec<Result<CompletionExchange, BackendError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<CompletionExchange, BackendError>>>> =
            reqs.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.cfg.max_in_flight.clamp(1, reqs.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= reqs.len() {
                        break;
                    }
                    let r = self.complete(&reqs[i]);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every request handled"))
            .collect()
    }
}
