//! Set-based extraction scoring and the fitness providers built on it.

mod llm;
mod metric;
mod surrogate;

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub use llm::{
    evaluate_genome_llm, evaluate_prompt, evaluate_zero_shot, parse_prediction, EvalError,
    EvaluationOutcome, LlmFitness, PromptTemplate, DEFAULT_INSTRUCTION, EVAL_TEMPERATURE,
};
pub use metric::{
    aggregate, report, score_entities, score_example, ExtractionCounts, IdMismatch, LabelCounts,
    LabelScores, MetricReport, Prediction,
};
pub use surrogate::{evaluate_genome_surrogate, SurrogateFitness};

/// Writes predictions one JSON record per line, in the example format
/// without the text field.
pub fn save_predictions(path: &Path, predictions: &[Prediction]) -> std::io::Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for p in predictions {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Reads predictions from example-format records; extra fields such as
/// `text` are ignored.
pub fn load_predictions(path: &Path) -> std::io::Result<Vec<Prediction>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("line {}: {e}", i + 1),
            )
        })?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{save_examples, Example, Provenance};

    #[test]
    fn predictions_round_trip_and_read_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.jsonl");
        let preds = vec![
            Prediction::new("a", [("A".to_string(), ["1".to_string()].into())].into()),
            Prediction::empty("b"),
        ];
        save_predictions(&path, &preds).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), preds);

        let ex = Example::new(
            "c",
            "text",
            [("B".to_string(), ["2".to_string()].into())].into(),
            Provenance::Human,
        )
        .unwrap();
        save_examples(&path, &[ex]).unwrap();
        let read = load_predictions(&path).unwrap();
        assert_eq!(read[0].example_id, "c");
        assert!(read[0].entities["B"].contains("2"));
    }
}
