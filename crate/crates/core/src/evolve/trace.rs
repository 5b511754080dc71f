use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub mean_fitness: f64,
    pub best_fitness: f64,
    pub diversity: f64,
    pub p_inter: f64,
    /// Fresh (uncached) fitness evaluations spent reaching this generation.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<GenerationRecord>,
}

const HEADER: &str = "generation\tmean_fitness\tbest_fitness\tdiversity\tp_inter\tevaluations";

#[derive(Debug, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&GenerationRecord> {
        self.records.last()
    }

    pub fn total_evaluations(&self) -> usize {
        self.records.iter().map(|r| r.evaluations).sum()
    }

    /// Tab-separated table with a header row. Floats use the shortest
    /// representation that round-trips.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.generation, r.mean_fitness, r.best_fitness, r.diversity, r.p_inter, r.evaluations
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, TraceParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == HEADER => {}
            _ => {
                return Err(TraceParseError {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| TraceParseError {
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 6 {
                return Err(err(format!("expected 6 columns, found {}", cols.len())));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(e.to_string()));
            records.push(GenerationRecord {
                generation: int(cols[0])?,
                mean_fitness: float(cols[1])?,
                best_fitness: float(cols[2])?,
                diversity: float(cols[3])?,
                p_inter: float(cols[4])?,
                evaluations: int(cols[5])?,
            });
        }
        Ok(Self { records })
    }

    pub fn write_tsv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_tsv())
    }
}
