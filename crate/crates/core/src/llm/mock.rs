//! Deterministic in-process transport for tests and offline runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::transport::{Route, Transport, TransportError};

type Handler = dyn Fn(Route, &Value, usize) -> Result<Value, TransportError> + Send + Sync;

/// Transport driven by a closure. Counts calls and records the peak number
/// of requests in flight at once.
pub struct MockTransport {
    handler: Box<Handler>,
    delay: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    log: Mutex<Vec<(Route, Value)>>,
}

impl MockTransport {
    pub fn new(
        handler: impl Fn(Route, &Value, usize) -> Result<Value, TransportError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            handler: Box::new(handler),
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Replies to every chat call with `content`.
    pub fn constant_chat(content: impl Into<String>) -> Self {
        let content = content.into();
        Self::new(move |_, _, _| Ok(chat_body(&content)))
    }

    /// Plays back `script` one entry per call; the last entry repeats.
    pub fn scripted_chat(script: Vec<Result<String, TransportError>>) -> Self {
        assert!(!script.is_empty(), "script must not be empty");
        Self::new(move |_, _, call| {
            let step = &script[call.min(script.len() - 1)];
            step.as_ref().map(|s| chat_body(s)).map_err(Clone::clone)
        })
    }

    /// Sleeps inside each call so concurrent callers overlap.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    /// Requests received so far, in arrival order.
    pub fn requests(&self) -> Vec<(Route, Value)> {
        self.log.lock().expect("log poisoned").clone()
    }
}

impl Transport for MockTransport {
    fn post_json(&self, route: Route, body: &Value) -> Result<Value, TransportError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        self.log
            .lock()
            .expect("log poisoned")
            .push((route, body.clone()));
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let out = (self.handler)(route, body, call);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

/// An OpenAI-shaped chat completion response carrying `content`.
pub fn chat_body(content: &str) -> Value {
    json!({
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    })
}

/// An OpenAI-shaped embeddings response.
pub fn embedding_body(vectors: &[Vec<f32>]) -> Value {
    let data: Vec<Value> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| json!({"object": "embedding", "index": i, "embedding": v}))
        .collect();
    json!({"object": "list", "data": data})
}

/// Pulls the user message out of a chat request body.
pub fn user_prompt(body: &Value) -> Option<&str> {
    body["messages"]
        .as_array()?
        .iter()
        .find(|m| m["role"] == "user")?["content"]
        .as_str()
}

/// Pulls the system message out of a chat request body.
pub fn system_prompt(body: &Value) -> Option<&str> {
    body["messages"]
        .as_array()?
        .iter()
        .find(|m| m["role"] == "system")?["content"]
        .as_str()
}

/// Pulls the input strings out of an embeddings request body.
pub fn embedding_inputs(body: &Value) -> Vec<String> {
    body["input"]
        .as_array()
        .map(|xs| {
            xs.iter()
                .filter_map(|x| x.as_str().map(str::to_owned))
                .collect()
        })
        .unwrap_or_default()
}
