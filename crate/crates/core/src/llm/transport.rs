use std::time::Duration;

use serde_json::Value;

/// OpenAI-compatible REST routes used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    ChatCompletions,
    Embeddings,
}

impl Route {
    pub fn path(self) -> &'static str {
        match self {
            Route::ChatCompletions => "chat/completions",
            Route::Embeddings => "embeddings",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("authentication failed (HTTP {0})")]
    Auth(u16),
    #[error("rate limited")]
    RateLimited,
    #[error("server error (HTTP {0})")]
    Server(u16),
    #[error("request rejected (HTTP {status}): {body}")]
    BadRequest { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed response body: {0}")]
    Malformed(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            TransportError::RateLimited
                | TransportError::Server(_)
                | TransportError::Timeout
                | TransportError::Network(_)
        )
    }

    pub fn from_status(status: u16, body: String) -> Self {
        match status {
            401 | 403 => TransportError::Auth(status),
            429 => TransportError::RateLimited,
            500..=599 => TransportError::Server(status),
            _ => TransportError::BadRequest { status, body },
        }
    }
}

/// Sends one JSON request and returns the decoded JSON response.
pub trait Transport: Send + Sync {
    fn post_json(&self, route: Route, body: &Value) -> Result<Value, TransportError>;
}

/// Blocking HTTP transport against an OpenAI-compatible base URL such as
/// `http://localhost:8000/v1`.
pub struct HttpTransport {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key,
            agent,
        }
    }

    fn url(&self, route: Route) -> String {
        format!("{}/{}", self.base_url, route.path())
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, route: Route, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.agent.post(self.url(route));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Network(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError::from_status(status, text));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| TransportError::Malformed(e.to_string()))
    }
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}
