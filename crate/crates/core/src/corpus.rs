//! Examples, label schemas, dataset splits and corpus chunk sampling.
//!
//! Examples are stored one JSON record per line:
//!
//! ```text
//! {"id":"a","text":"Revenue was $1.","entities":{"Revenue":["1"]},"provenance":"human"}
//! ```
//!
//! A missing `entities` field is an empty map (a negative example). Entity
//! values are sets in memory and sorted lists on disk.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;

/// Label name to the set of verbatim surface-form values.
pub type EntityMap = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("example {id:?}: empty value for label {label:?}")]
    EmptyValue { id: String, label: String },
    #[error("example has an empty {0}")]
    EmptyField(&'static str),
    #[error("n_validation ({n_validation}) must be smaller than the number of examples ({total})")]
    ValidationTooLarge { n_validation: usize, total: usize },
    #[error("example id {0:?} appears in more than one split")]
    OverlappingSplits(String),
    #[error("invalid label schema: {0}")]
    Schema(String),
    #[error("invalid corpus document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    #[default]
    Human,
}

/// One sentence-level instance with its gold entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub entities: EntityMap,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
struct RawExample {
    id: String,
    text: String,
    #[serde(default)]
    entities: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    provenance: Provenance,
}

impl<'de> Deserialize<'de> for Example {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawExample::deserialize(d)?;
        let entities = raw
            .entities
            .into_iter()
            .map(|(label, values)| (label, values.into_iter().collect()))
            .collect();
        Example::new(raw.id, raw.text, entities, raw.provenance).map_err(serde::de::Error::custom)
    }
}

impl Example {
    /// Builds an example, dropping labels whose value set is empty.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        entities: EntityMap,
        provenance: Provenance,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(CorpusError::EmptyField("id"));
        }
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyField("text"));
        }
        let mut kept = EntityMap::new();
        for (label, values) in entities {
            if label.trim().is_empty() {
                return Err(CorpusError::EmptyField("label name"));
            }
            if values.iter().any(|v| v.trim().is_empty()) {
                return Err(CorpusError::EmptyValue { id, label });
            }
            if !values.is_empty() {
                kept.insert(label, values);
            }
        }
        Ok(Self {
            id,
            text,
            entities: kept,
            provenance,
        })
    }

    /// Total number of gold values across labels.
    pub fn value_count(&self) -> usize {
        self.entities.values().map(BTreeSet::len).sum()
    }

    pub fn is_negative(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Ordered list of distinct label names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    labels: Vec<String>,
}

impl LabelSchema {
    pub fn new(labels: Vec<String>) -> Result<Self, CorpusError> {
        if labels.is_empty() {
            return Err(CorpusError::Schema("no labels".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.trim().is_empty() {
                return Err(CorpusError::Schema("empty label name".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(CorpusError::Schema(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Sorted union of every label used in `examples`.
    pub fn from_examples<'a>(
        examples: impl IntoIterator<Item = &'a Example>,
    ) -> Result<Self, CorpusError> {
        let labels: BTreeSet<&str> = examples
            .into_iter()
            .flat_map(|e| e.entities.keys().map(String::as_str))
            .collect();
        Self::new(labels.into_iter().map(str::to_owned).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub candidates: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl DatasetSplit {
    pub fn new(
        candidates: Vec<Example>,
        validation: Vec<Example>,
        test: Vec<Example>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for e in candidates.iter().chain(&validation).chain(&test) {
            if !seen.insert(e.id.as_str()) {
                return Err(CorpusError::OverlappingSplits(e.id.clone()));
            }
        }
        Ok(Self {
            candidates,
            validation,
            test,
        })
    }
}

/// Reads line-delimited example records. Blank lines are skipped.
pub fn load_examples(path: &Path) -> Result<Vec<Example>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_examples(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

pub fn read_examples(reader: impl BufRead) -> Result<Vec<Example>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let example: Example = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !ids.insert(example.id.clone()) {
            return Err(CorpusError::DuplicateId(example.id));
        }
        out.push(example);
    }
    Ok(out)
}

pub fn write_examples(writer: impl Write, examples: &[Example]) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for e in examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_examples(path: &Path, examples: &[Example]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_examples(file, examples).map_err(io_err)
}

/// Splits off `n_validation` examples chosen uniformly at random.
///
/// Both halves keep the input order. The test split is left empty.
pub fn split_dataset(
    examples: Vec<Example>,
    n_validation: usize,
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    if n_validation >= examples.len() {
        return Err(CorpusError::ValidationTooLarge {
            n_validation,
            total: examples.len(),
        });
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut is_validation = vec![false; examples.len()];
    for &i in &order[..n_validation] {
        is_validation[i] = true;
    }
    let (mut candidates, mut validation) = (Vec::new(), Vec::new());
    for (e, v) in examples.into_iter().zip(is_validation) {
        if v {
            validation.push(e);
        } else {
            candidates.push(e);
        }
    }
    DatasetSplit::new(candidates, validation, Vec::new())
}

/// An unlabeled domain document to be cut into prompt chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusDocument {
    pub id: String,
    text: String,
    chunk_size: usize,
}

impl CorpusDocument {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        chunk_size: usize,
    ) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.is_empty() {
            return Err(CorpusError::Document("empty text".into()));
        }
        if chunk_size == 0 {
            return Err(CorpusError::Document("chunk size must be positive".into()));
        }
        Ok(Self {
            id: id.into(),
            text,
            chunk_size,
        })
    }

    pub fn from_file(path: &Path, chunk_size: usize) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(id, text, chunk_size)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    /// Character offsets of the chunk grid: `0, c, 2c, ...`.
    pub fn chunk_starts(&self) -> Vec<usize> {
        let n_chars = self.text.chars().count();
        (0..n_chars).step_by(self.chunk_size).collect()
    }
}

/// Draws `n` chunks with replacement, each starting on the chunk grid.
/// Lengths are measured in characters; the final grid cell may be short.
pub fn sample_chunks(doc: &CorpusDocument, n: usize, seed: u64) -> Vec<String> {
    if n == 0 {
        return Vec::new();
    }
    let chars: Vec<char> = doc.text.chars().collect();
    let starts = doc.chunk_starts();
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let start = starts[rng.random_range(0..starts.len())];
            let end = (start + doc.chunk_size).min(chars.len());
            chars[start..end].iter().collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn ex(id: &str, labels: &[(&str, &[&str])]) -> Example {
        let entities = labels
            .iter()
            .map(|(l, vs)| (l.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect();
        Example::new(id, format!("text of {id}"), entities, Provenance::Human).unwrap()
    }

    #[test]
    fn empty_file_loads_nothing() {
        assert!(read_examples(Cursor::new("")).unwrap().is_empty());
    }

    #[test]
    fn decodes_single_record() {
        let src = r#"{"id":"a","text":"Revenue was $1.","entities":{"Revenue":["1"]}}"#;
        let got = read_examples(Cursor::new(src)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].entities.len(), 1);
        assert_eq!(got[0].entities["Revenue"].len(), 1);
        assert!(got[0].entities["Revenue"].contains("1"));
        assert_eq!(got[0].provenance, Provenance::Human);
    }

    #[test]
    fn duplicate_id_is_named() {
        let src = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        match read_examples(Cursor::new(src)) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_number() {
        let src = "{\"id\":\"a\",\"text\":\"x\"}\nnot json\n";
        match read_examples(Cursor::new(src)) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn empty_value_rejected() {
        let src = r#"{"id":"a","text":"x","entities":{"Revenue":[""]}}"#;
        assert!(matches!(
            read_examples(Cursor::new(src)),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn values_kept_verbatim_and_sorted_on_disk() {
        let e = ex("a", &[("Revenue", &["$125,843 million", "12"])]);
        let mut buf = Vec::new();
        write_examples(&mut buf, std::slice::from_ref(&e)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.contains(r#"["$125,843 million","12"]"#));
        assert_eq!(read_examples(Cursor::new(buf)).unwrap(), vec![e]);
    }

    #[test]
    fn split_without_validation_keeps_everything() {
        let xs: Vec<_> = (0..10).map(|i| ex(&format!("e{i}"), &[])).collect();
        let split = split_dataset(xs.clone(), 0, 1).unwrap();
        assert_eq!(split.candidates, xs);
        assert!(split.validation.is_empty());
    }

    #[test]
    fn split_is_deterministic() {
        let xs: Vec<_> = (0..10).map(|i| ex(&format!("e{i}"), &[])).collect();
        let a = split_dataset(xs.clone(), 3, 7).unwrap();
        let b = split_dataset(xs, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.validation.len(), 3);
        assert_eq!(a.candidates.len(), 7);
    }

    #[test]
    fn split_rejects_oversized_validation() {
        let xs: Vec<_> = (0..10).map(|i| ex(&format!("e{i}"), &[])).collect();
        assert!(matches!(
            split_dataset(xs, 10, 1),
            Err(CorpusError::ValidationTooLarge { .. })
        ));
    }

    #[test]
    fn schema_rejects_duplicates() {
        assert!(LabelSchema::new(vec![]).is_err());
        assert!(LabelSchema::new(vec!["A".into(), "A".into()]).is_err());
        let s = LabelSchema::from_examples(&[ex("a", &[("B", &["1"])]), ex("b", &[("A", &["2"])])])
            .unwrap();
        assert_eq!(s.labels(), ["A", "B"]);
    }

    #[test]
    fn zero_chunks() {
        let doc = CorpusDocument::new("d", "abc", 2).unwrap();
        assert!(sample_chunks(&doc, 0, 1).is_empty());
    }

    #[test]
    fn single_chunk_is_whole_text() {
        let text: String = (0..100)
            .map(|i| char::from(b'a' + (i % 26) as u8))
            .collect();
        let doc = CorpusDocument::new("d", text.clone(), 100).unwrap();
        assert_eq!(sample_chunks(&doc, 1, 3), vec![text]);
    }

    #[test]
    fn chunks_are_grid_windows() {
        let text: String = (0..1000)
            .map(|i| char::from(b'a' + (i % 26) as u8))
            .collect();
        let doc = CorpusDocument::new("d", text.clone(), 200).unwrap();
        // Enumerate every window of the grid independently.
        let windows: Vec<String> = (0..5)
            .map(|w| text[w * 200..(w + 1) * 200].to_string())
            .collect();
        let got = sample_chunks(&doc, 5, 11);
        assert_eq!(got.len(), 5);
        for c in &got {
            assert!(c.chars().count() <= 200);
            assert!(windows.contains(c));
        }
        assert_eq!(got, sample_chunks(&doc, 5, 11));
    }

    #[test]
    fn last_chunk_may_be_short() {
        let doc = CorpusDocument::new("d", "abcdefg", 3).unwrap();
        let windows = ["abc", "def", "g"];
        for c in sample_chunks(&doc, 50, 2) {
            assert!(windows.contains(&c.as_str()));
        }
    }

    #[test]
    fn chunking_counts_characters_not_bytes() {
        let doc = CorpusDocument::new("d", "ééééé", 2).unwrap();
        for c in sample_chunks(&doc, 20, 5) {
            assert!(c.chars().count() <= 2);
        }
    }

    #[test]
    fn document_invariants() {
        assert!(CorpusDocument::new("d", "", 5).is_err());
        assert!(CorpusDocument::new("d", "x", 0).is_err());
    }
}
