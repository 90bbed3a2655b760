//! Clients for the chat-completion classifier and the inference sidecar.
//!
//! Every payload that crosses a provider boundary is re-validated here, so a
//! misbehaving endpoint surfaces as a [`ProviderError`] instead of leaking
//! out-of-contract values into the pipeline.

mod http;
mod mock;
mod ratelimit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Taxonomy;

pub use http::{
    backoff_delay, HttpChatClient, HttpReply, HttpSidecarClient, RetryPolicy, Transport, TransportError,
    UreqTransport,
};
pub use mock::{MockChat, MockSidecar, MockSidecarCalls};
pub use ratelimit::{Clock, RateLimiter, SimulatedClock, SystemClock};

pub const DEFAULT_API_KEY_ENV: &str = "QUADMLTC_API_KEY";
pub const DEFAULT_VARIATIONS: usize = 2;
pub const DEFAULT_BEAMS: usize = 5;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("rate limit still exceeded after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("endpoint unreachable after {attempts} attempts: {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("response violates contract: {0}")]
    Contract(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_rpm() -> u32 {
    60
}

/// Connection settings for one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default)]
    pub temperature: f64,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            requests_per_minute: default_rpm(),
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.endpoint.trim().is_empty() {
            return Err(ProviderError::Config("endpoint is empty".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(ProviderError::Config(format!(
                "timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ProviderError::Config(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if self.requests_per_minute == 0 {
            return Err(ProviderError::Config("requests_per_minute must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completion request body. Always a single user message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(model: &str, prompt: &str, temperature: f64) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: Option<String>,
}

impl ChatResponse {
    /// Extracts the first choice from a chat-completion response body.
    pub fn from_wire(body: &str) -> Result<Self, ProviderError> {
        #[derive(Deserialize)]
        struct Wire {
            choices: Vec<Choice>,
        }
        #[derive(Deserialize)]
        struct Choice {
            message: ChatMessage,
            #[serde(default)]
            finish_reason: Option<String>,
        }
        let wire: Wire = serde_json::from_str(body).map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::InvalidResponse("no choices in response".into()))?;
        Ok(Self {
            text: choice.message.content,
            finish_reason: choice.finish_reason,
        })
    }
}

/// Anything that can answer a classification prompt.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<ChatResponse, ProviderError>;
}

/// Sends `prompt` and returns the completion text verbatim.
pub fn classify_chat(provider: &dyn ChatProvider, prompt: &str) -> Result<String, ProviderError> {
    provider.complete(prompt).map(|r| r.text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyTokenRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyTokenResponse {
    pub tokens: Vec<String>,
    pub token_count: usize,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseRequest {
    pub text: String,
    pub num_return_variations: usize,
    pub num_beams: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseResponse {
    pub variations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelProbRequest {
    pub text: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProbResponse {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default)]
    pub models: Vec<String>,
}

/// The three inference endpoints of the sidecar service, returning raw payloads.
pub trait SidecarProvider: Send + Sync {
    fn key_tokens(&self, text: &str) -> Result<KeyTokenResponse, ProviderError>;
    fn paraphrases(&self, text: &str, variations: usize, beams: usize) -> Result<ParaphraseResponse, ProviderError>;
    fn label_probabilities(&self, text: &str, labels: &[String]) -> Result<LabelProbResponse, ProviderError>;
    fn health(&self) -> Result<HealthResponse, ProviderError>;
}

/// Number of key tokens to request for a text of `token_count` words.
pub fn top_k_for(token_count: usize) -> usize {
    match token_count {
        0..=50 => 3,
        51..=100 => 5,
        // round-half-up of 10%
        n => ((n + 5) / 10).max(1),
    }
}

/// Word count after punctuation is removed.
pub fn count_tokens(text: &str) -> usize {
    strip_punctuation(text).split_whitespace().count()
}

pub(crate) fn strip_punctuation(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect()
}

/// Validated key tokens for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyTokens {
    tokens: Vec<String>,
}

impl KeyTokens {
    /// Checks a sidecar response against the source text.
    pub fn validate(text: &str, response: KeyTokenResponse) -> Result<Self, ProviderError> {
        let KeyTokenResponse {
            tokens,
            token_count,
            top_k,
        } = response;
        let expected_k = top_k_for(token_count);
        if top_k != expected_k {
            return Err(ProviderError::Contract(format!(
                "top_k {top_k} does not match schedule value {expected_k} for {token_count} tokens"
            )));
        }
        if tokens.len() > top_k {
            return Err(ProviderError::Contract(format!(
                "{} tokens returned but top_k is {top_k}",
                tokens.len()
            )));
        }
        Self::new(text, tokens)
    }

    /// Builds a token list, enforcing the per-token rules against `text`.
    pub fn new(text: &str, tokens: Vec<String>) -> Result<Self, ProviderError> {
        if tokens.is_empty() {
            return Err(ProviderError::Contract("empty key-token list".into()));
        }
        let haystack = text.to_lowercase();
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if t.trim().is_empty() {
                return Err(ProviderError::Contract("blank key token".into()));
            }
            if *t != t.to_lowercase() {
                return Err(ProviderError::Contract(format!("key token {t:?} is not lowercase")));
            }
            if !haystack.contains(t.as_str()) {
                return Err(ProviderError::Contract(format!("key token {t:?} does not occur in the text")));
            }
            if !seen.insert(t.as_str()) {
                return Err(ProviderError::Contract(format!("duplicate key token {t:?}")));
            }
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Exactly two non-empty rewrites of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paraphrases {
    variations: [String; 2],
}

impl Paraphrases {
    pub fn new(variations: Vec<String>) -> Result<Self, ProviderError> {
        if variations.len() != DEFAULT_VARIATIONS {
            return Err(ProviderError::Contract(format!(
                "expected {DEFAULT_VARIATIONS} variations, got {}",
                variations.len()
            )));
        }
        if variations.iter().any(|v| v.trim().is_empty()) {
            return Err(ProviderError::Contract("empty variation".into()));
        }
        let [a, b]: [String; 2] = variations.try_into().expect("length checked");
        Ok(Self { variations: [a, b] })
    }

    pub fn first(&self) -> &str {
        &self.variations[0]
    }

    pub fn second(&self) -> &str {
        &self.variations[1]
    }
}

/// Per-label independent probabilities in taxonomy order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>, expected_len: usize) -> Result<Self, ProviderError> {
        if probs.len() != expected_len {
            return Err(ProviderError::Contract(format!(
                "expected {expected_len} probabilities, got {}",
                probs.len()
            )));
        }
        if let Some((j, p)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(ProviderError::Contract(format!("probability {p} at position {j} is outside [0, 1]")));
        }
        Ok(Self { probs })
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn require_text(text: &str) -> Result<(), ProviderError> {
    if text.trim().is_empty() {
        Err(ProviderError::InvalidRequest("text is empty".into()))
    } else {
        Ok(())
    }
}

pub fn fetch_key_tokens(provider: &dyn SidecarProvider, text: &str) -> Result<KeyTokens, ProviderError> {
    require_text(text)?;
    KeyTokens::validate(text, provider.key_tokens(text)?)
}

pub fn fetch_paraphrases(provider: &dyn SidecarProvider, text: &str) -> Result<Paraphrases, ProviderError> {
    require_text(text)?;
    let response = provider.paraphrases(text, DEFAULT_VARIATIONS, DEFAULT_BEAMS)?;
    Paraphrases::new(response.variations)
}

pub fn fetch_label_probabilities(
    provider: &dyn SidecarProvider,
    text: &str,
    taxonomy: &Taxonomy,
) -> Result<ProbabilityVector, ProviderError> {
    require_text(text)?;
    let labels: Vec<String> = taxonomy.names().map(str::to_string).collect();
    let response = provider.label_probabilities(text, &labels)?;
    ProbabilityVector::new(response.probs, taxonomy.len())
}
