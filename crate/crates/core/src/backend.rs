//! Completion interface and the offline mock.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{format_number, ColumnKind};
use crate::prompt::RenderedPrompt;

pub const DEFAULT_API_KEY_ENV: &str = "IMPUTE_FORGE_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("environment variable `{0}` holding the API key is not set")]
    AuthMissing(String),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider returned status {status} after {attempts} attempts: {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
    #[error("no example values for class `{0}`")]
    NoExamplesForClass(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

impl BackendError {
    /// Errors that retrying or falling back cannot fix: the run should stop.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            BackendError::AuthMissing(_)
                | BackendError::InvalidConfig(_)
                | BackendError::Http { status: 401 | 403, .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub backoff_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4.1".to_string(),
            temperature: 0.0,
            max_output_tokens: 1024,
            timeout_secs: 120,
            max_retries: 3,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            max_in_flight: 2,
            backoff_base_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidConfig("temperature must be >= 0".into()));
        }
        if self.kind == BackendKind::Http {
            for (name, v) in [
                ("endpoint", &self.endpoint),
                ("model", &self.model),
                ("api_key_env", &self.api_key_env),
            ] {
                if v.trim().is_empty() {
                    return Err(BackendError::InvalidConfig(alloc::format!("{name} is required")));
                }
            }
            if self.max_in_flight == 0 {
                return Err(BackendError::InvalidConfig("max_in_flight must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Class-conditional values the mock answers from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockContext {
    pub kind: Option<ColumnKind>,
    /// Observed values of the imputation feature among the examples, per class.
    pub examples_by_class: BTreeMap<String, Vec<String>>,
    /// Class of each presented missing record, in manifest order.
    pub missing_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptRequest {
    pub id: String,
    pub prompt: RenderedPrompt,
    pub mock: MockContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionExchange {
    pub prompt_text: String,
    pub response_text: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub estimated_prompt_tokens: usize,
    /// Sleep before each retry, in milliseconds.
    pub backoff_ms: Vec<u64>,
}

pub trait Completer: Sync {
    /// Short name recorded in logs ("mock", "http").
    fn mode(&self) -> &'static str;

    fn complete(&self, req: &PromptRequest) -> Result<CompletionExchange, BackendError>;

    /// Completes several independent requests. Results come back in request
    /// order; implementations may run them concurrently.
    fn complete_batch(&self, reqs: &[PromptRequest]) -> Vec<Result<CompletionExchange, BackendError>> {
        reqs.iter().map(|r| self.complete(r)).collect()
    }
}

fn mode_of(values: &[String]) -> &str {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.as_str()).or_default() += 1;
    }
    let mut best = ("", 0);
    for (v, n) in counts {
        if n > best.1 {
            best = (v, n);
        }
    }
    best.0
}

fn lower_median(values: &[String]) -> Option<f64> {
    let mut xs: Vec<f64> = values.iter().filter_map(|v| v.parse().ok()).collect();
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs[(xs.len() - 1) / 2])
}

/// Per missing record, the class-wise mode (smallest value on ties) or, for
/// numerical features, the lower median of the example values. One value
/// per line in manifest order.
pub fn mock_impute(ctx: &MockContext) -> Result<String, BackendError> {
    let numeric = ctx.kind == Some(ColumnKind::Numerical);
    let mut answers: BTreeMap<&str, String> = BTreeMap::new();
    let mut out = String::new();
    for class in &ctx.missing_classes {
        if !answers.contains_key(class.as_str()) {
            let values = ctx
                .examples_by_class
                .get(class)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| BackendError::NoExamplesForClass(class.clone()))?;
            let answer = if numeric {
                format_number(lower_median(values).ok_or_else(|| BackendError::NoExamplesForClass(class.clone()))?)
            } else {
                mode_of(values).to_string()
            };
            answers.insert(class.as_str(), answer);
        }
        out.push_str(&answers[class.as_str()]);
        out.push('\n');
    }
    Ok(out)
}

/// Deterministic offline backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl Completer for MockBackend {
    fn mode(&self) -> &'static str {
        "mock"
    }

    fn complete(&self, req: &PromptRequest) -> Result<CompletionExchange, BackendError> {
        let response_text = mock_impute(&req.mock)?;
        Ok(CompletionExchange {
            prompt_text: req.prompt.text.clone(),
            response_text,
            latency_ms: 0,
            attempt_count: 1,
            estimated_prompt_tokens: req.prompt.estimated_tokens,
            backoff_ms: Vec::new(),
        })
    }
}
