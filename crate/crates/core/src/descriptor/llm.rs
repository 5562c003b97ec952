//! Chat-completion transport.

use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Connection and sampling settings for descriptor generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    /// Total attempts per query, including the first.
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub api_key_env_var: String,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 60,
            api_key_env_var: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmConfigError {
    #[error("max_retries must be at least 1")]
    NoAttempts,
    #[error("temperature must be a finite value >= 0, got {0}")]
    Temperature(f64),
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmConfigError> {
        if self.max_retries < 1 {
            return Err(LlmConfigError::NoAttempts);
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmConfigError::Temperature(self.temperature));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

/// One system + user exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("HTTP {status} from {url}")]
    Status { status: u16, url: String, body: String },
    #[error("request to {url} failed: {message}")]
    Network { url: String, message: String },
    #[error("completion response has no message content")]
    Malformed { body: String },
}

impl TransportError {
    /// Raw response text, when the server sent one.
    pub fn raw(&self) -> &str {
        match self {
            TransportError::Status { body, .. } | TransportError::Malformed { body } => body,
            _ => "",
        }
    }

    /// Authentication failures and a missing key are not worth re-sending.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::MissingApiKey(_) => false,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Network { .. } | TransportError::Malformed { .. } => true,
        }
    }
}

pub trait ChatTransport: Send + Sync {
    /// Returns the assistant message content.
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 2],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireContent,
}

#[derive(Deserialize)]
struct WireContent {
    content: Option<String>,
}

/// Blocking client for OpenAI-compatible `/chat/completions` endpoints.
pub struct HttpChatTransport {
    agent: ureq::Agent,
    url: String,
    api_key: String,
}

impl HttpChatTransport {
    /// Reads the API key from the environment variable named in `cfg`. An
    /// empty variable name means the endpoint needs no authentication.
    pub fn new(cfg: &LlmConfig) -> Result<Self, TransportError> {
        let api_key = if cfg.api_key_env_var.is_empty() {
            String::new()
        } else {
            std::env::var(&cfg.api_key_env_var)
                .map_err(|_| TransportError::MissingApiKey(cfg.api_key_env_var.clone()))?
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: cfg.endpoint_url.clone(),
            api_key,
        })
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let body = WireRequest {
            model: &request.model,
            messages: [
                WireMessage { role: "system", content: &request.system },
                WireMessage { role: "user", content: &request.user },
            ],
            temperature: request.temperature,
        };
        let mut req = self.agent.post(&self.url);
        if !self.api_key.is_empty() {
            req = req.header("Authorization", &format!("Bearer {}", self.api_key));
        }
        let network = |e: ureq::Error| TransportError::Network {
            url: self.url.clone(),
            message: e.to_string(),
        };
        let mut response = req.send_json(&body).map_err(network)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(network)?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status {
                status,
                url: self.url.clone(),
                body: text,
            });
        }
        let parsed: WireResponse =
            serde_json::from_str(&text).map_err(|_| TransportError::Malformed { body: text.clone() })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(TransportError::Malformed { body: text })
    }
}
