//! Minimal chat-completions client with token and cost accounting.
//!
//! Requests use the common `/chat/completions` JSON shape (`model`,
//! `messages[].role/content`); replies are read from
//! `choices[0].message.content` and `usage.{prompt,completion}_tokens`.
//! Costs are exact decimals rounded to 1e-6 USD.

mod ledger;
pub mod stub;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::count_tokens;

pub use ledger::{compute_cost, UsageLedger, UsageRecord};

pub const API_KEY_ENV: &str = "SKILLMOO_API_KEY";
pub const BASE_URL_ENV: &str = "SKILLMOO_BASE_URL";
pub const DEFAULT_REQUEST_TIMEOUT_S: f64 = 900.0;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request exceeded the {0} s timeout")]
    Timeout(f64),
    #[error("missing API credentials (set {API_KEY_ENV})")]
    MissingCredentials,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub price_per_1k_input: Decimal,
    pub price_per_1k_output: Decimal,
    pub request_timeout_s: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl ModelConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key: None,
            price_per_1k_input: Decimal::ZERO,
            price_per_1k_output: Decimal::ZERO,
            request_timeout_s: DEFAULT_REQUEST_TIMEOUT_S,
            max_retries: 1,
            max_in_flight: 4,
        }
    }

    /// Reads `SKILLMOO_BASE_URL` and `SKILLMOO_API_KEY`.
    pub fn from_env(model_name: impl Into<String>) -> Result<Self, LlmError> {
        let base =
            std::env::var(BASE_URL_ENV).map_err(|_| LlmError::InvalidConfig(format!("{BASE_URL_ENV} is not set")))?;
        let mut cfg = Self::new(base, model_name);
        cfg.api_key = std::env::var(API_KEY_ENV).ok();
        Ok(cfg)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_prices(mut self, per_1k_input: Decimal, per_1k_output: Decimal) -> Self {
        self.price_per_1k_input = per_1k_input;
        self.price_per_1k_output = per_1k_output;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.price_per_1k_input.is_sign_negative() || self.price_per_1k_output.is_sign_negative() {
            return Err(LlmError::InvalidConfig("prices must be nonnegative".into()));
        }
        if !(self.request_timeout_s > 0.0) {
            return Err(LlmError::InvalidConfig("request timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(LlmError::InvalidConfig("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub text: String,
    pub usage: UsageRecord,
}

/// Anything that answers a chat request. [`LlmClient`] is the HTTP
/// implementation; tests may script replies directly.
pub trait ChatModel: Send + Sync {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, LlmError>;
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct LlmClient {
    config: ModelConfig,
    agent: ureq::Agent,
    ledger: Arc<Mutex<UsageLedger>>,
    in_flight: InFlight,
}

impl LlmClient {
    pub fn new(config: ModelConfig) -> Result<Self, LlmError> {
        config.validate()?;
        if config.api_key.as_deref().is_none_or(str::is_empty) {
            return Err(LlmError::MissingCredentials);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let cap = config.max_in_flight;
        Ok(Self {
            config,
            agent,
            ledger: Arc::new(Mutex::new(UsageLedger::default())),
            in_flight: InFlight {
                count: Mutex::new(0),
                freed: Condvar::new(),
                cap,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Snapshot of every call recorded so far.
    pub fn ledger(&self) -> UsageLedger {
        self.ledger.lock().unwrap().clone()
    }

    fn send_once(&self, messages: &[ChatMessage]) -> Result<(String, Option<Usage>), LlmError> {
        let body = RequestBody {
            model: &self.config.model_name,
            messages,
        };
        let key = self.config.api_key.as_deref().unwrap_or_default();
        let result = self
            .agent
            .post(&self.config.endpoint())
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body);
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(LlmError::Timeout(self.config.request_timeout_s)),
            Err(e) => return Err(LlmError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Err(LlmError::Timeout(self.config.request_timeout_s)),
            Err(e) => return Err(LlmError::Transport(e.to_string())),
        };
        if !(200..300).contains(&status) {
            return Err(LlmError::Endpoint { status, body: text });
        }
        let parsed: ResponseBody =
            serde_json::from_str(&text).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?;
        Ok((content, parsed.usage))
    }
}

impl ChatModel for LlmClient {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, LlmError> {
        if messages.is_empty() {
            return Err(LlmError::InvalidConfig("chat needs at least one message".into()));
        }
        let _slot = self.in_flight.acquire();
        let start = Instant::now();
        let mut attempt = 0;
        let (text, usage) = loop {
            match self.send_once(messages) {
                Ok(ok) => break ok,
                Err(e @ (LlmError::Transport(_) | LlmError::Endpoint { .. }))
                    if attempt < self.config.max_retries && retryable(&e) =>
                {
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let latency_s = start.elapsed().as_secs_f64();
        let (input_tokens, output_tokens, estimated) = match usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens, false),
            None => {
                let prompt: usize = messages.iter().map(|m| count_tokens(&m.content)).sum();
                (prompt as u64, count_tokens(&text) as u64, true)
            }
        };
        let record = UsageRecord {
            input_tokens,
            output_tokens,
            cost_usd: compute_cost(
                input_tokens,
                output_tokens,
                self.config.price_per_1k_input,
                self.config.price_per_1k_output,
            ),
            latency_s,
            estimated,
        };
        self.ledger.lock().unwrap().push(record.clone());
        Ok(ChatReply { text, usage: record })
    }
}

fn retryable(e: &LlmError) -> bool {
    match e {
        LlmError::Transport(_) => true,
        LlmError::Endpoint { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}
