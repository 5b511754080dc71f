//! Synthetic candidate generation.
//!
//! Two streams share the budget: the positive stream asks for sentences that
//! carry at least one target entity, the negative stream for sentences that
//! carry none. Each batch prompt embeds one corpus chunk and runs at a
//! temperature jittered around the base value.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::concurrency::bounded_map;
use crate::corpus::{EntityMap, Example, Provenance};
use crate::llm::{ChatRequest, LlmClient, LlmError};
use crate::seed;

pub const DEFAULT_SYSTEM_PROMPT: &str = include_str!("../templates/generation_system.txt");
pub const DEFAULT_POSITIVE_TEMPLATE: &str = include_str!("../templates/positive.txt");
pub const DEFAULT_NEGATIVE_TEMPLATE: &str = include_str!("../templates/negative.txt");

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("no corpus chunks to seed generation")]
    NoChunks,
    #[error("every generation batch failed ({batches} attempted); last error: {last}")]
    NoSuccessfulBatches { batches: usize, last: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub batch_size: usize,
    pub base_temperature: f64,
    pub temperature_jitter: f64,
    pub n_total: usize,
    pub positive_fraction: f64,
    pub system_prompt: String,
    pub positive_template: String,
    pub negative_template: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            batch_size: 20,
            base_temperature: 0.7,
            temperature_jitter: 0.2,
            n_total: 10_000,
            positive_fraction: 0.5,
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_owned(),
            positive_template: DEFAULT_POSITIVE_TEMPLATE.to_owned(),
            negative_template: DEFAULT_NEGATIVE_TEMPLATE.to_owned(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerateError> {
        let bad = |m: &str| Err(GenerateError::Config(m.to_owned()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.n_total == 0 {
            return bad("n_total must be at least 1");
        }
        if !(self.temperature_jitter >= 0.0
            && self.base_temperature - self.temperature_jitter >= 0.0)
        {
            return bad("base_temperature - temperature_jitter must be >= 0");
        }
        if self.base_temperature + self.temperature_jitter > 2.0 {
            return bad("base_temperature + temperature_jitter must be <= 2");
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return bad("positive_fraction must lie in [0, 1]");
        }
        for (name, t) in [
            ("positive_template", &self.positive_template),
            ("negative_template", &self.negative_template),
        ] {
            if !t.contains("{chunk}") {
                return Err(GenerateError::Config(format!(
                    "{name} lacks a {{chunk}} placeholder"
                )));
            }
        }
        if self.system_prompt.trim().is_empty() {
            return bad("system_prompt must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Positive,
    Negative,
}

impl Stream {
    fn tag(self) -> &'static str {
        match self {
            Stream::Positive => "pos",
            Stream::Negative => "neg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub index: usize,
    pub stream: Stream,
    pub count: usize,
}

/// Positive batches first, then negative ones; the last batch of each
/// stream carries the remainder.
pub fn plan_batches(cfg: &GenerationConfig) -> Vec<BatchPlan> {
    let n_pos = (cfg.n_total as f64 * cfg.positive_fraction).round() as usize;
    let n_pos = n_pos.min(cfg.n_total);
    let mut plan = Vec::new();
    for (stream, mut left) in [
        (Stream::Positive, n_pos),
        (Stream::Negative, cfg.n_total - n_pos),
    ] {
        while left > 0 {
            let count = left.min(cfg.batch_size);
            plan.push(BatchPlan {
                index: plan.len(),
                stream,
                count,
            });
            left -= count;
        }
    }
    plan
}

/// Temperature for one batch, uniform on `[base - jitter, base + jitter]`.
pub fn draw_temperature(cfg: &GenerationConfig, seed: u64, batch_index: usize) -> f64 {
    if cfg.temperature_jitter == 0.0 {
        return cfg.base_temperature;
    }
    let mut rng = seed::rng(seed::derive_indexed(
        seed,
        "temperature",
        batch_index as u64,
    ));
    let u: f64 = rng.random();
    let lo = cfg.base_temperature - cfg.temperature_jitter;
    let hi = cfg.base_temperature + cfg.temperature_jitter;
    (lo + (hi - lo) * u).clamp(lo, hi)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamReport {
    pub requested: usize,
    pub batches: usize,
    pub batches_failed: usize,
    pub emitted: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub requested: usize,
    /// Records that became examples.
    pub parsed_ok: usize,
    /// Records the model emitted but that failed validation.
    pub rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub batches: usize,
    pub batches_failed: usize,
    pub batch_failures_by_reason: BTreeMap<String, usize>,
    pub streams: BTreeMap<Stream, StreamReport>,
}

impl GenerationReport {
    fn reject(&mut self, reason: &str) {
        self.rejected += 1;
        *self
            .rejected_by_reason
            .entry(reason.to_owned())
            .or_default() += 1;
    }

    fn fail_batch(&mut self, stream: Stream, reason: &str) {
        self.batches_failed += 1;
        *self
            .batch_failures_by_reason
            .entry(reason.to_owned())
            .or_default() += 1;
        self.streams.entry(stream).or_default().batches_failed += 1;
    }
}

fn render(template: &str, chunk: &str, count: usize, labels: &[String]) -> String {
    template
        .replace("{count}", &count.to_string())
        .replace("{labels}", &labels.join(", "))
        .replace("{chunk}", chunk)
}

/// Extracts the JSON array of records from a model reply. Accepts a bare
/// array, one wrapped in a code fence, or `{"examples": [...]}`.
pub fn parse_batch(reply: &str) -> Option<Vec<Value>> {
    let start = reply.find(['[', '{'])?;
    let end = reply.rfind([']', '}'])?;
    if end < start {
        return None;
    }
    match serde_json::from_str::<Value>(&reply[start..=end]).ok()? {
        Value::Array(items) => Some(items),
        Value::Object(mut map) => match map.remove("examples")? {
            Value::Array(items) => Some(items),
            _ => None,
        },
        _ => None,
    }
}

/// Validates one record against the example schema and the stream rule.
/// The error is the rejection reason.
pub fn validate_record(
    record: &Value,
    stream: Stream,
    labels: &[String],
) -> Result<(String, EntityMap), &'static str> {
    let obj = record.as_object().ok_or("schema")?;
    let text = obj.get("text").and_then(Value::as_str).ok_or("schema")?;
    if text.trim().is_empty() {
        return Err("empty-text");
    }
    let mut entities = EntityMap::new();
    match obj.get("entities") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (label, values) in map {
                let values = values.as_array().ok_or("schema")?;
                let mut set = std::collections::BTreeSet::new();
                for v in values {
                    let v = v.as_str().ok_or("schema")?;
                    if v.trim().is_empty() {
                        return Err("empty-value");
                    }
                    set.insert(v.to_owned());
                }
                if set.is_empty() {
                    continue;
                }
                if !labels.is_empty() && !labels.iter().any(|l| l == label) {
                    return Err("unknown-label");
                }
                entities.insert(label.clone(), set);
            }
        }
        Some(_) => return Err("schema"),
    }
    let ok = match stream {
        Stream::Positive => !entities.is_empty(),
        Stream::Negative => entities.is_empty(),
    };
    if !ok {
        return Err("stream-constraint");
    }
    Ok((text.to_owned(), entities))
}

enum BatchOutcome {
    Records(Vec<Value>),
    Unparseable,
    ClientError(LlmError),
}

fn run_batch(
    cfg: &GenerationConfig,
    plan: &BatchPlan,
    chunk: &str,
    labels: &[String],
    client: &LlmClient,
    seed: u64,
) -> BatchOutcome {
    let template = match plan.stream {
        Stream::Positive => &cfg.positive_template,
        Stream::Negative => &cfg.negative_template,
    };
    let temperature = draw_temperature(cfg, seed, plan.index);
    let req = match ChatRequest::new(
        cfg.system_prompt.clone(),
        render(template, chunk, plan.count, labels),
        temperature,
    ) {
        Ok(r) => r,
        Err(e) => return BatchOutcome::ClientError(e),
    };
    // One retry at the same temperature when the reply is not a record list.
    for _ in 0..2 {
        match client.chat(&req) {
            Ok(reply) => {
                if let Some(records) = parse_batch(&reply) {
                    return BatchOutcome::Records(records);
                }
            }
            Err(e) => return BatchOutcome::ClientError(e),
        }
    }
    BatchOutcome::Unparseable
}

/// Produces up to `cfg.n_total` synthetic examples. Chunks are assigned to
/// batches round-robin. Failed batches are skipped and tallied; the call
/// fails only when no batch succeeds.
pub fn generate_pool(
    cfg: &GenerationConfig,
    chunks: &[String],
    labels: &[String],
    client: &LlmClient,
    seed: u64,
) -> Result<(Vec<Example>, GenerationReport), GenerateError> {
    cfg.validate()?;
    if chunks.is_empty() {
        return Err(GenerateError::NoChunks);
    }
    let plan = plan_batches(cfg);
    let outcomes = bounded_map(&plan, client.config().max_in_flight, |_, p| {
        run_batch(
            cfg,
            p,
            &chunks[p.index % chunks.len()],
            labels,
            client,
            seed,
        )
    });

    let mut report = GenerationReport {
        requested: cfg.n_total,
        batches: plan.len(),
        ..Default::default()
    };
    let mut examples = Vec::new();
    let mut last_error = String::new();
    let mut succeeded = 0;
    for (p, outcome) in plan.iter().zip(outcomes) {
        let stream_report = report.streams.entry(p.stream).or_default();
        stream_report.requested += p.count;
        stream_report.batches += 1;
        let records = match outcome {
            BatchOutcome::Records(r) => r,
            BatchOutcome::Unparseable => {
                last_error = format!("batch {}: unparseable reply", p.index);
                report.fail_batch(p.stream, "unparseable");
                continue;
            }
            BatchOutcome::ClientError(e) => {
                log::warn!("generation batch {} failed: {e}", p.index);
                last_error = format!("batch {}: {e}", p.index);
                report.fail_batch(p.stream, "client-error");
                continue;
            }
        };
        succeeded += 1;
        let mut accepted = 0;
        for (j, record) in records.iter().enumerate() {
            if accepted == p.count {
                report.reject("over-quota");
                continue;
            }
            match validate_record(record, p.stream, labels) {
                Ok((text, entities)) => {
                    let id = format!("syn-{}-{:05}-{:03}", p.stream.tag(), p.index, j);
                    let example = Example::new(id, text, entities, Provenance::Synthetic)
                        .expect("validated record forms a valid example");
                    examples.push(example);
                    accepted += 1;
                    report.parsed_ok += 1;
                    report.streams.entry(p.stream).or_default().emitted += 1;
                }
                Err(reason) => report.reject(reason),
            }
        }
    }
    if succeeded == 0 {
        return Err(GenerateError::NoSuccessfulBatches {
            batches: plan.len(),
            last: last_error,
        });
    }
    Ok((examples, report))
}
