use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metric::{report, score_entities, ExtractionCounts, MetricReport, Prediction};
use crate::concurrency::bounded_map;
use crate::corpus::{EntityMap, Example};
use crate::evolve::{Fitness, FitnessError, Genome};
use crate::llm::{ChatRequest, LlmClient, LlmError};
use crate::reduce::ClusteredPool;

pub const DEFAULT_INSTRUCTION: &str = include_str!("../../templates/instruction.txt");

/// Evaluation queries run deterministically.
pub const EVAL_TEMPERATURE: f64 = 0.0;

/// The task instruction placed ahead of the demonstrations. `{labels}` is
/// replaced by the comma-separated label list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplate {
    pub instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            instruction: DEFAULT_INSTRUCTION.to_owned(),
        }
    }
}

fn entities_json(entities: &EntityMap) -> String {
    let map: BTreeMap<&String, Vec<&String>> = entities
        .iter()
        .map(|(l, vs)| (l, vs.iter().collect()))
        .collect();
    serde_json::to_string(&map).expect("string maps serialise")
}

impl PromptTemplate {
    /// The system prompt: instruction followed by the demonstrations in the
    /// given order.
    pub fn render(&self, labels: &[String], demonstrations: &[&Example]) -> String {
        let mut out = self
            .instruction
            .trim_end()
            .replace("{labels}", &labels.join(", "));
        if !demonstrations.is_empty() {
            out.push_str("\n\nExamples:\n");
            for d in demonstrations {
                write!(
                    out,
                    "\nSentence: {}\nOutput: {}\n",
                    d.text,
                    entities_json(&d.entities)
                )
                .expect("writing to a String cannot fail");
            }
        }
        out
    }

    pub fn render_query(text: &str) -> String {
        format!("Sentence: {text}\nOutput:")
    }
}

/// Reads the reply as a JSON object from the first `{` to the last `}`.
/// Each label maps to a string or a list of strings. Labels outside `labels`
/// are dropped. Returns `None` when the reply does not fit this shape.
pub fn parse_prediction(reply: &str, example_id: &str, labels: &[String]) -> Option<Prediction> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    if end < start {
        return None;
    }
    let Value::Object(obj) = serde_json::from_str::<Value>(&reply[start..=end]).ok()? else {
        return None;
    };
    let mut entities = EntityMap::new();
    for (label, value) in obj {
        let values: Vec<String> = match value {
            Value::String(s) => vec![s],
            Value::Array(items) => items
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => Some(s),
                    _ => None,
                })
                .collect::<Option<_>>()?,
            Value::Null => Vec::new(),
            _ => return None,
        };
        if !labels.contains(&label) {
            continue;
        }
        let set: std::collections::BTreeSet<String> = values
            .into_iter()
            .filter(|v| !v.trim().is_empty())
            .collect();
        if !set.is_empty() {
            entities.insert(label, set);
        }
    }
    Some(Prediction::new(example_id, entities))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationOutcome {
    pub report: MetricReport,
    pub counts: ExtractionCounts,
    /// Queries answered so far.
    pub answered: usize,
    /// Replies that could not be parsed and were scored as empty.
    pub unparseable: usize,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("model client failed after {answered} of {total} queries: {source}", answered = partial.answered)]
    Client {
        #[source]
        source: LlmError,
        total: usize,
        partial: Box<EvaluationOutcome>,
    },
}

/// Queries the model once per validation example under `system_prompt` and
/// scores the replies. Queries run concurrently up to `workers`.
pub fn evaluate_prompt(
    client: &LlmClient,
    system_prompt: &str,
    validation: &[Example],
    labels: &[String],
    workers: usize,
) -> Result<EvaluationOutcome, EvalError> {
    if validation.is_empty() {
        return Err(EvalError::EmptyValidation);
    }
    let failure: Mutex<Option<LlmError>> = Mutex::new(None);
    let replies: Vec<Option<String>> = bounded_map(validation, workers, |_, ex| {
        if failure.lock().expect("failure slot").is_some() {
            return None;
        }
        let req = ChatRequest::new(
            system_prompt,
            PromptTemplate::render_query(&ex.text),
            EVAL_TEMPERATURE,
        );
        match req.and_then(|r| client.chat(&r)) {
            Ok(reply) => Some(reply),
            Err(e) => {
                failure.lock().expect("failure slot").get_or_insert(e);
                None
            }
        }
    });

    let mut counts = ExtractionCounts::default();
    let mut predictions = Vec::new();
    let mut unparseable = 0;
    for (ex, reply) in validation.iter().zip(&replies) {
        let Some(reply) = reply else { continue };
        let pred = parse_prediction(reply, &ex.id, labels).unwrap_or_else(|| {
            unparseable += 1;
            Prediction::empty(&ex.id)
        });
        counts.merge(&score_entities(&ex.entities, &pred.entities));
        predictions.push(pred);
    }
    let outcome = EvaluationOutcome {
        report: report(&counts),
        answered: predictions.len(),
        counts,
        unparseable,
        predictions,
    };
    match failure.into_inner().expect("failure slot") {
        None => Ok(outcome),
        Some(source) => Err(EvalError::Client {
            source,
            total: validation.len(),
            partial: Box::new(outcome),
        }),
    }
}

/// Renders the genome's demonstrations into the prompt and scores it on the
/// validation set. Fitness is micro-F1.
pub fn evaluate_genome_llm(
    genome: &Genome,
    pool: &ClusteredPool,
    validation: &[Example],
    client: &LlmClient,
    template: &PromptTemplate,
    labels: &[String],
) -> Result<(f64, EvaluationOutcome), EvalError> {
    let system = template.render(labels, &genome.examples(pool));
    let outcome = evaluate_prompt(
        client,
        &system,
        validation,
        labels,
        client.config().max_in_flight,
    )?;
    Ok((outcome.report.micro_f1, outcome))
}

/// Instruction only, no demonstrations.
pub fn evaluate_zero_shot(
    client: &LlmClient,
    template: &PromptTemplate,
    validation: &[Example],
    labels: &[String],
) -> Result<EvaluationOutcome, EvalError> {
    let system = template.render(labels, &[]);
    evaluate_prompt(
        client,
        &system,
        validation,
        labels,
        client.config().max_in_flight,
    )
}

/// LLM-backed fitness over a fixed validation set.
pub struct LlmFitness<'a> {
    pub client: &'a LlmClient,
    pub template: &'a PromptTemplate,
    pub validation: &'a [Example],
    pub labels: &'a [String],
}

impl Fitness for LlmFitness<'_> {
    fn evaluate(&self, genome: &Genome, pool: &ClusteredPool) -> Result<f64, FitnessError> {
        evaluate_genome_llm(
            genome,
            pool,
            self.validation,
            self.client,
            self.template,
            self.labels,
        )
        .map(|(f, _)| f)
        .map_err(|e| Box::new(e) as FitnessError)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use crate::llm::mock::{chat_body, system_prompt, user_prompt};
    use crate::llm::{ClientConfig, MockTransport, TransportError};
    use std::sync::Arc;

    fn labels() -> Vec<String> {
        vec!["Revenue".into(), "NetIncome".into()]
    }

    fn validation(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                let entities = [(
                    "Revenue".to_string(),
                    [format!("{i},000")].into_iter().collect(),
                )]
                .into_iter()
                .collect();
                Example::new(
                    format!("v{i}"),
                    format!("Revenue was {i},000 dollars."),
                    entities,
                    Provenance::Human,
                )
                .unwrap()
            })
            .collect()
    }

    fn client(transport: MockTransport) -> LlmClient {
        let cfg = ClientConfig {
            max_retries: 0,
            backoff_initial_ms: 1,
            ..ClientConfig::default()
        };
        LlmClient::new(Arc::new(transport), cfg)
    }

    /// Answers with the gold entities of whichever validation sentence is asked.
    fn echo_gold(
        val: Vec<Example>,
        keep: impl Fn(usize) -> bool + Send + Sync + 'static,
    ) -> MockTransport {
        MockTransport::new(move |_, body, _| {
            let user = user_prompt(body).unwrap_or_default();
            let i = val
                .iter()
                .position(|e| user.contains(&e.text))
                .expect("known sentence");
            let reply = if keep(i) {
                entities_json(&val[i].entities)
            } else {
                "{}".to_string()
            };
            Ok(chat_body(&reply))
        })
    }

    #[test]
    fn perfect_oracle_scores_one() {
        let val = validation(6);
        let c = client(echo_gold(val.clone(), |_| true));
        let out = evaluate_zero_shot(&c, &PromptTemplate::default(), &val, &labels()).unwrap();
        assert_eq!(out.report.micro_f1, 1.0);
        assert_eq!(out.unparseable, 0);
    }

    #[test]
    fn unparseable_scores_zero() {
        let val = validation(4);
        let c = client(MockTransport::constant_chat("I am not sure."));
        let out = evaluate_zero_shot(&c, &PromptTemplate::default(), &val, &labels()).unwrap();
        assert_eq!(out.report.micro_f1, 0.0);
        assert_eq!(out.unparseable, 4);
        assert_eq!(out.counts.total().fn_, 4);
    }

    #[test]
    fn half_correct() {
        let val = validation(10);
        let c = client(echo_gold(val.clone(), |i| i % 2 == 0));
        let out = evaluate_zero_shot(&c, &PromptTemplate::default(), &val, &labels()).unwrap();
        assert_eq!(out.report.micro_precision, 1.0);
        assert_eq!(out.report.micro_recall, 0.5);
        assert!((out.report.micro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn genome_prompt_uses_gene_order_and_zero_temperature() {
        let val = validation(2);
        let pool = ClusteredPool::from_labels(validation(4), &[0, 0, 1, 1]);
        let transport = Arc::new(MockTransport::constant_chat("{}"));
        let c = LlmClient::new(transport.clone(), ClientConfig::default());
        let genome = Genome::new(vec![
            crate::evolve::Gene::new(1, 1),
            crate::evolve::Gene::new(0, 0),
        ]);
        evaluate_genome_llm(
            &genome,
            &pool,
            &val,
            &c,
            &PromptTemplate::default(),
            &labels(),
        )
        .unwrap();
        for (_, body) in transport.requests() {
            assert_eq!(body["temperature"], 0.0);
            let sys = system_prompt(&body).unwrap();
            let a = sys.find("Revenue was 3,000").unwrap();
            let b = sys.find("Revenue was 0,000").unwrap();
            assert!(a < b);
            assert!(sys.contains("Revenue, NetIncome"));
        }
    }

    #[test]
    fn client_failure_keeps_partial_counts() {
        let val = validation(3);
        let script = vec![Ok("{}".to_string()), Err(TransportError::Auth(401))];
        let c = LlmClient::new(
            Arc::new(MockTransport::scripted_chat(script)),
            ClientConfig::default(),
        );
        let err = evaluate_prompt(&c, "sys", &val, &labels(), 1).unwrap_err();
        match err {
            EvalError::Client { partial, total, .. } => {
                assert_eq!(total, 3);
                assert_eq!(partial.answered, 1);
                assert_eq!(partial.counts.total().fn_, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parser_shapes() {
        let l = labels();
        let p = parse_prediction(
            "Sure: {\"Revenue\": [\"5\", \" \"], \"Other\": [\"x\"], \"NetIncome\": \"7\"} done",
            "a",
            &l,
        )
        .unwrap();
        assert_eq!(p.entities.len(), 2);
        assert!(p.entities["NetIncome"].contains("7"));
        assert!(parse_prediction("[1, 2]", "a", &l).is_none());
        assert!(parse_prediction("{\"Revenue\": [1]}", "a", &l).is_none());
        assert!(parse_prediction("} {", "a", &l).is_none());
        assert!(parse_prediction("{}", "a", &l).unwrap().entities.is_empty());
    }

    #[test]
    fn render_without_demonstrations_has_no_examples_block() {
        let t = PromptTemplate::default();
        let s = t.render(&labels(), &[]);
        assert!(!s.contains("Examples:"));
        assert!(!s.contains("{labels}"));
    }
}
