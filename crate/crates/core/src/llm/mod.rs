//! Client for OpenAI-compatible chat-completion and embedding services.
//!
//! Requests go through a [`Transport`]; [`HttpTransport`] talks to a real
//! server and [`MockTransport`] scripts responses in-process. The client adds
//! exponential-backoff retries, a bound on requests in flight and a
//! content-addressed embedding cache.

mod cache;
mod hashing;
pub mod mock;
mod transport;

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::concurrency::{bounded_map, Semaphore};

pub use cache::EmbeddingCache;
pub use hashing::HashingEmbedder;
pub use mock::MockTransport;
pub use transport::{HttpTransport, Route, Transport, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{source} (non-retryable)")]
    Fatal {
        #[source]
        source: TransportError,
    },
    #[error("giving up after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: usize,
        last: TransportError,
    },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
}

impl LlmError {
    /// True when the service refused our credentials.
    pub fn is_auth(&self) -> bool {
        matches!(
            self,
            LlmError::Fatal {
                source: TransportError::Auth(_)
            }
        )
    }

    /// True when retries ran out on rate limiting.
    pub fn is_rate_limit_exhaustion(&self) -> bool {
        matches!(
            self,
            LlmError::RetriesExhausted {
                last: TransportError::RateLimited,
                ..
            }
        )
    }
}

/// Transport and model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub chat_model: String,
    pub embedding_model: String,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub max_retries: usize,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
    pub max_output_tokens: u32,
    pub embed_batch_size: usize,
    /// Expected embedding width; inferred from the first response when unset.
    pub embedding_dimension: Option<usize>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            chat_model: "gpt-oss-120b".into(),
            embedding_model: "Qwen3-Embedding-4B".into(),
            timeout_secs: 120,
            max_in_flight: 8,
            max_retries: 4,
            backoff_initial_ms: 500,
            backoff_max_ms: 30_000,
            max_output_tokens: 4096,
            embed_batch_size: 64,
            embedding_dimension: None,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        if self.embed_batch_size == 0 {
            return Err("embed_batch_size must be at least 1".into());
        }
        if self.endpoint.trim().is_empty() {
            return Err("endpoint must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    /// Overrides the client's default when set.
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
        temperature: f64,
    ) -> Result<Self, LlmError> {
        let req = Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature,
            max_output_tokens: None,
        };
        if !(0.0..=2.0).contains(&req.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                req.temperature
            )));
        }
        if req.system_prompt.trim().is_empty() || req.user_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt".into()));
        }
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, LlmError> {
        if values.is_empty() {
            return Err(LlmError::MalformedResponse("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LlmError::MalformedResponse(
                "non-finite embedding value".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Anything that turns texts into fixed-width vectors.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError>;
}

pub struct LlmClient {
    transport: Arc<dyn Transport>,
    config: ClientConfig,
    in_flight: Semaphore,
    cache: EmbeddingCache,
}

impl LlmClient {
    pub fn new(transport: Arc<dyn Transport>, config: ClientConfig) -> Self {
        let permits = config.max_in_flight.max(1);
        Self {
            transport,
            config,
            in_flight: Semaphore::new(permits),
            cache: EmbeddingCache::in_memory(),
        }
    }

    /// Builds an HTTP client, reading the API key from the configured
    /// environment variable.
    pub fn from_config(config: ClientConfig) -> Result<Self, LlmError> {
        config.validate().map_err(LlmError::InvalidRequest)?;
        let api_key = match &config.api_key_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| LlmError::MissingApiKey(var.clone()))?)
            }
            None => None,
        };
        let transport = HttpTransport::new(
            config.endpoint.clone(),
            api_key,
            Duration::from_secs(config.timeout_secs),
        );
        Ok(Self::new(Arc::new(transport), config))
    }

    pub fn with_cache(mut self, cache: EmbeddingCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    fn backoff(&self, attempt: usize) -> Duration {
        let factor = 1u64.checked_shl(attempt.min(32) as u32).unwrap_or(u64::MAX);
        let ms = self
            .config
            .backoff_initial_ms
            .saturating_mul(factor)
            .min(self.config.backoff_max_ms);
        Duration::from_millis(ms)
    }

    /// Posts with retries. A permit is held only while a request is on the
    /// wire, never while backing off.
    fn post_with_retry(&self, route: Route, body: &Value) -> Result<Value, LlmError> {
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.in_flight.acquire();
                self.transport.post_json(route, body)
            };
            match result {
                Ok(v) => return Ok(v),
                Err(e) if !e.is_retryable() => return Err(LlmError::Fatal { source: e }),
                Err(e) => {
                    if attempt >= self.config.max_retries {
                        return Err(LlmError::RetriesExhausted {
                            attempts: attempt + 1,
                            last: e,
                        });
                    }
                    log::debug!("{route:?} attempt {} failed: {e}; retrying", attempt + 1);
                    let wait = self.backoff(attempt);
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                    attempt += 1;
                }
            }
        }
    }

    /// Returns the content of the first choice.
    pub fn chat(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.chat_model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens.unwrap_or(self.config.max_output_tokens),
        });
        let resp = self.post_with_retry(Route::ChatCompletions, &body)?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
    }

    fn request_embeddings(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, LlmError> {
        let body = json!({"model": self.config.embedding_model, "input": texts});
        let resp = self.post_with_retry(Route::Embeddings, &body)?;
        let data = resp["data"]
            .as_array()
            .ok_or_else(|| LlmError::MalformedResponse("missing data array".into()))?;
        if data.len() != texts.len() {
            return Err(LlmError::MalformedResponse(format!(
                "{} embeddings for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        let mut out: Vec<Option<Vec<f32>>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let idx = item["index"].as_u64().map_or(pos, |i| i as usize);
            let values = item["embedding"]
                .as_array()
                .ok_or_else(|| LlmError::MalformedResponse("missing embedding".into()))?
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32))
                .collect::<Option<Vec<f32>>>()
                .ok_or_else(|| LlmError::MalformedResponse("non-numeric embedding".into()))?;
            let slot = out
                .get_mut(idx)
                .ok_or_else(|| LlmError::MalformedResponse(format!("index {idx} out of range")))?;
            *slot = Some(values);
        }
        out.into_iter()
            .map(|v| v.ok_or_else(|| LlmError::MalformedResponse("duplicate index".into())))
            .collect()
    }

    /// Embeds `texts`, one vector per input in order. Texts already in the
    /// cache, or repeated within the call, are requested once.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(LlmError::InvalidRequest(
                "empty text in embedding batch".into(),
            ));
        }
        let model = &self.config.embedding_model;
        let keys: Vec<String> = texts
            .iter()
            .map(|t| EmbeddingCache::key(model, t))
            .collect();

        let mut seen = HashSet::new();
        let missing: Vec<(&String, &str)> = keys
            .iter()
            .zip(texts)
            .filter(|(k, _)| self.cache.get(k).is_none() && seen.insert(k.as_str()))
            .map(|(k, t)| (k, t.as_str()))
            .collect();

        let chunks: Vec<&[(&String, &str)]> =
            missing.chunks(self.config.embed_batch_size).collect();
        let results = bounded_map(&chunks, self.config.max_in_flight, |_, chunk| {
            let inputs: Vec<&str> = chunk.iter().map(|(_, t)| *t).collect();
            self.request_embeddings(&inputs)
        });

        let mut expected = self.config.embedding_dimension;
        let mut fresh = Vec::with_capacity(missing.len());
        for (chunk, result) in chunks.iter().zip(results) {
            for ((key, _), values) in chunk.iter().zip(result?) {
                check_dimension(&mut expected, values.len())?;
                fresh.push(((*key).clone(), EmbeddingVector::new(values)?.values));
            }
        }
        self.cache.insert_many(fresh)?;

        keys.iter()
            .map(|k| {
                let values = self
                    .cache
                    .get(k)
                    .ok_or_else(|| LlmError::MalformedResponse("cache miss after fill".into()))?;
                check_dimension(&mut expected, values.len())?;
                EmbeddingVector::new(values)
            })
            .collect()
    }
}

fn check_dimension(expected: &mut Option<usize>, got: usize) -> Result<(), LlmError> {
    match *expected {
        Some(e) if e != got => Err(LlmError::DimensionMismatch { expected: e, got }),
        Some(_) => Ok(()),
        None => {
            *expected = Some(got);
            Ok(())
        }
    }
}

impl Embedder for LlmClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        self.embed_batch(texts)
    }
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("config", &self.config)
            .finish()
    }
}
