use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityMap, Example};

/// Values a model extracted for one example.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "id")]
    pub example_id: String,
    #[serde(default)]
    pub entities: EntityMap,
}

impl Prediction {
    pub fn new(example_id: impl Into<String>, entities: EntityMap) -> Self {
        Self {
            example_id: example_id.into(),
            entities,
        }
    }

    pub fn empty(example_id: impl Into<String>) -> Self {
        Self::new(example_id, EntityMap::new())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl LabelCounts {
    pub fn add(&mut self, other: LabelCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, written in count form so that
    /// exact cases stay exact.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label tallies. Only labels that occur in gold or prediction appear.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtractionCounts {
    pub labels: BTreeMap<String, LabelCounts>,
}

impl ExtractionCounts {
    pub fn merge(&mut self, other: &ExtractionCounts) {
        for (label, c) in &other.labels {
            self.labels.entry(label.clone()).or_default().add(*c);
        }
    }

    pub fn total(&self) -> LabelCounts {
        let mut t = LabelCounts::default();
        for c in self.labels.values() {
            t.add(*c);
        }
        t
    }

    pub fn get(&self, label: &str) -> LabelCounts {
        self.labels.get(label).copied().unwrap_or_default()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("prediction for {pred:?} scored against gold example {gold:?}")]
pub struct IdMismatch {
    pub gold: String,
    pub pred: String,
}

fn normalized(values: &BTreeSet<String>) -> BTreeSet<&str> {
    values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .collect()
}

/// Exact-match set comparison per label, after trimming whitespace.
pub fn score_example(gold: &Example, pred: &Prediction) -> Result<ExtractionCounts, IdMismatch> {
    if gold.id != pred.example_id {
        return Err(IdMismatch {
            gold: gold.id.clone(),
            pred: pred.example_id.clone(),
        });
    }
    Ok(score_entities(&gold.entities, &pred.entities))
}

pub fn score_entities(gold: &EntityMap, pred: &EntityMap) -> ExtractionCounts {
    let empty = BTreeSet::new();
    let labels: BTreeSet<&String> = gold.keys().chain(pred.keys()).collect();
    let mut counts = ExtractionCounts::default();
    for label in labels {
        let g = normalized(gold.get(label).unwrap_or(&empty));
        let p = normalized(pred.get(label).unwrap_or(&empty));
        if g.is_empty() && p.is_empty() {
            continue;
        }
        let tp = g.intersection(&p).count() as u64;
        counts.labels.insert(
            label.clone(),
            LabelCounts {
                tp,
                fp: p.len() as u64 - tp,
                fn_: g.len() as u64 - tp,
            },
        );
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub totals: LabelCounts,
    pub per_label: BTreeMap<String, LabelScores>,
}

/// Pools counts across examples and labels. Macro-F1 averages over the
/// labels that occur anywhere in the pooled counts.
pub fn aggregate(counts: &[ExtractionCounts]) -> MetricReport {
    let mut pooled = ExtractionCounts::default();
    for c in counts {
        pooled.merge(c);
    }
    report(&pooled)
}

pub fn report(pooled: &ExtractionCounts) -> MetricReport {
    let totals = pooled.total();
    let per_label: BTreeMap<String, LabelScores> = pooled
        .labels
        .iter()
        .map(|(label, c)| {
            (
                label.clone(),
                LabelScores {
                    precision: c.precision(),
                    recall: c.recall(),
                    f1: c.f1(),
                    counts: *c,
                },
            )
        })
        .collect();
    let macro_f1 = if per_label.is_empty() {
        0.0
    } else {
        per_label.values().map(|s| s.f1).sum::<f64>() / per_label.len() as f64
    };
    MetricReport {
        micro_precision: totals.precision(),
        micro_recall: totals.recall(),
        micro_f1: totals.f1(),
        macro_f1,
        totals,
        per_label,
    }
}

impl MetricReport {
    /// Label, tp, fp, fn, precision, recall, f1 as a tab-separated table.
    pub fn per_label_tsv(&self) -> String {
        let mut out = String::from("label\ttp\tfp\tfn\tprecision\trecall\tf1\n");
        for (label, s) in &self.per_label {
            writeln!(
                out,
                "{label}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.counts.tp, s.counts.fp, s.counts.fn_, s.precision, s.recall, s.f1
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}
