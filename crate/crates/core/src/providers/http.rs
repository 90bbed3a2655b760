use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ratelimit::{Clock, RateLimiter, SystemClock};
use super::{
    ChatProvider, ChatRequest, ChatResponse, HealthResponse, KeyTokenRequest, KeyTokenResponse, LabelProbRequest,
    LabelProbResponse, ParaphraseRequest, ParaphraseResponse, ProviderConfig, ProviderError, SidecarProvider,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Connect(String),
    Other(String),
}

/// Minimal HTTP surface the clients need; swapped out in tests.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<HttpReply, TransportError>;
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpReply, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn finish(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<HttpReply, TransportError> {
        let mut response = result.map_err(classify_ureq_error)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(classify_ureq_error)?;
        Ok(HttpReply { status, body })
    }
}

fn classify_ureq_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
        ureq::Error::ConnectionFailed | ureq::Error::HostNotFound | ureq::Error::Io(_) => {
            TransportError::Connect(e.to_string())
        }
        other => TransportError::Other(other.to_string()),
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<HttpReply, TransportError> {
        let mut request = self.agent.post(url).header("Content-Type", "application/json");
        for (k, v) in headers {
            request = request.header(k.as_str(), v.as_str());
        }
        Self::finish(request.send(body))
    }

    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpReply, TransportError> {
        let mut request = self.agent.get(url);
        for (k, v) in headers {
            request = request.header(k.as_str(), v.as_str());
        }
        Self::finish(request.call())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl RetryPolicy {
    pub fn new(max_retries: u32) -> Self {
        Self {
            max_retries,
            base: Duration::from_secs(1),
            cap: Duration::from_secs(30),
        }
    }
}

/// Delay before retry number `attempt` (0-based), scaled by `jitter` in [0, 1).
///
/// The ceiling doubles from `base` up to `cap`; the actual delay lies in
/// the upper half of that ceiling.
pub fn backoff_delay(policy: &RetryPolicy, attempt: u32, jitter: f64) -> Duration {
    let ceiling = policy
        .base
        .checked_mul(1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX))
        .unwrap_or(policy.cap)
        .min(policy.cap);
    ceiling.mul_f64(0.5 + 0.5 * jitter.clamp(0.0, 1.0))
}

enum Failure {
    Timeout,
    RateLimited,
    Status(u16, String),
    Connect(String),
}

/// One configured endpoint with retries, backoff and a request cap.
struct Endpoint {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    policy: RetryPolicy,
    jitter: Mutex<ChaCha8Rng>,
}

impl Endpoint {
    fn new(config: ProviderConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(Self {
            limiter: RateLimiter::new(config.requests_per_minute, clock.clone()),
            policy: RetryPolicy::new(config.max_retries),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
            config,
            transport,
            clock,
        })
    }

    fn auth_headers(&self, required: bool) -> Result<Vec<(String, String)>, ProviderError> {
        if self.config.api_key_env.is_empty() {
            return if required {
                Err(ProviderError::MissingApiKey(String::new()))
            } else {
                Ok(Vec::new())
            };
        }
        match std::env::var(&self.config.api_key_env) {
            Ok(key) if !key.is_empty() => Ok(vec![("Authorization".into(), format!("Bearer {key}"))]),
            _ if required => Err(ProviderError::MissingApiKey(self.config.api_key_env.clone())),
            _ => Ok(Vec::new()),
        }
    }

    fn url(&self, path: &str) -> String {
        if path.is_empty() {
            self.config.endpoint.clone()
        } else {
            format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
        }
    }

    /// Sends the request, retrying timeouts, 429, 408 and 5xx responses.
    fn send(&self, path: &str, body: Option<&str>, key_required: bool) -> Result<String, ProviderError> {
        let headers = self.auth_headers(key_required)?;
        let url = self.url(path);
        let attempts = self.policy.max_retries + 1;
        let mut last = Failure::Timeout;
        for attempt in 0..attempts {
            self.limiter.acquire();
            let outcome = match body {
                Some(b) => self.transport.post_json(&url, &headers, b),
                None => self.transport.get(&url, &headers),
            };
            last = match outcome {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 401 || r.status == 403 => return Err(ProviderError::Auth { status: r.status }),
                Ok(r) if r.status == 429 => Failure::RateLimited,
                Ok(r) if r.status == 408 || r.status >= 500 => Failure::Status(r.status, r.body),
                Ok(r) => {
                    return Err(ProviderError::Http {
                        status: r.status,
                        body: r.body,
                    })
                }
                Err(TransportError::Timeout) => Failure::Timeout,
                Err(TransportError::Connect(m)) => Failure::Connect(m),
                Err(TransportError::Other(m)) => return Err(ProviderError::InvalidResponse(m)),
            };
            if attempt + 1 < attempts {
                let u: f64 = self.jitter.lock().unwrap().gen();
                self.clock.sleep(backoff_delay(&self.policy, attempt, u));
            }
        }
        Err(match last {
            Failure::Timeout => ProviderError::Timeout { attempts },
            Failure::RateLimited => ProviderError::RateLimited { attempts },
            Failure::Status(status, body) => ProviderError::Http { status, body },
            Failure::Connect(message) => ProviderError::Unreachable { attempts, message },
        })
    }

    fn post<T: Serialize>(&self, path: &str, payload: &T, key_required: bool) -> Result<String, ProviderError> {
        let body = serde_json::to_string(payload).map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        self.send(path, Some(&body), key_required)
    }
}

fn parse<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, ProviderError> {
    serde_json::from_str(body).map_err(|e| ProviderError::InvalidResponse(e.to_string()))
}

/// Chat-completion client speaking the common `messages` schema.
pub struct HttpChatClient {
    endpoint: Endpoint,
}

impl HttpChatClient {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let transport = Arc::new(UreqTransport::new(Duration::from_secs_f64(config.timeout_secs)));
        Self::with_transport(config, transport, Arc::new(SystemClock::new()))
    }

    pub fn with_transport(
        config: ProviderConfig,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: Endpoint::new(config, transport, clock)?,
        })
    }
}

impl ChatProvider for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<ChatResponse, ProviderError> {
        let config = &self.endpoint.config;
        let request = ChatRequest::new(&config.model, prompt, config.temperature);
        let body = self.endpoint.post("", &request, true)?;
        ChatResponse::from_wire(&body)
    }
}

/// Client for the key-token, paraphrase and label-probability service.
pub struct HttpSidecarClient {
    endpoint: Endpoint,
}

impl HttpSidecarClient {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let transport = Arc::new(UreqTransport::new(Duration::from_secs_f64(config.timeout_secs)));
        Self::with_transport(config, transport, Arc::new(SystemClock::new()))
    }

    pub fn with_transport(
        config: ProviderConfig,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: Endpoint::new(config, transport, clock)?,
        })
    }
}

impl SidecarProvider for HttpSidecarClient {
    fn key_tokens(&self, text: &str) -> Result<KeyTokenResponse, ProviderError> {
        let request = KeyTokenRequest { text: text.to_string() };
        parse(&self.endpoint.post("/key-tokens", &request, false)?)
    }

    fn paraphrases(&self, text: &str, variations: usize, beams: usize) -> Result<ParaphraseResponse, ProviderError> {
        let request = ParaphraseRequest {
            text: text.to_string(),
            num_return_variations: variations,
            num_beams: beams,
        };
        parse(&self.endpoint.post("/paraphrases", &request, false)?)
    }

    fn label_probabilities(&self, text: &str, labels: &[String]) -> Result<LabelProbResponse, ProviderError> {
        let request = LabelProbRequest {
            text: text.to_string(),
            labels: labels.to_vec(),
        };
        parse(&self.endpoint.post("/label-probabilities", &request, false)?)
    }

    fn health(&self) -> Result<HealthResponse, ProviderError> {
        parse(&self.endpoint.send("/health", None, false)?)
    }
}
