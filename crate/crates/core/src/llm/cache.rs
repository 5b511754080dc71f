use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Content-addressed embedding store, optionally backed by an append-only
/// JSON-lines file so long embedding runs can be resumed.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: Mutex<HashMap<String, Vec<f32>>>,
    path: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    embedding: Vec<f32>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates on first insert) a persistent cache file. Lines
    /// that fail to parse, such as a torn final write, are skipped.
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match serde_json::from_str::<Entry>(&line) {
                    Ok(e) => {
                        entries.insert(e.key, e.embedding);
                    }
                    Err(err) => log::warn!("{}: skipping cache line: {err}", path.display()),
                }
            }
        }
        Ok(Self {
            entries: Mutex::new(entries),
            path: Some(path),
        })
    }

    pub fn key(model: &str, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(model.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn get(&self, key: &str) -> Option<Vec<f32>> {
        self.entries
            .lock()
            .expect("cache poisoned")
            .get(key)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn insert_many(&self, items: Vec<(String, Vec<f32>)>) -> std::io::Result<()> {
        let mut entries = self.entries.lock().expect("cache poisoned");
        if let Some(path) = &self.path {
            let file = OpenOptions::new().create(true).append(true).open(path)?;
            let mut w = BufWriter::new(file);
            for (key, embedding) in &items {
                let entry = Entry {
                    key: key.clone(),
                    embedding: embedding.clone(),
                };
                serde_json::to_writer(&mut w, &entry)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        entries.extend(items);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persists_between_opens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let k = EmbeddingCache::key("m", "hello");
        {
            let c = EmbeddingCache::open(&path).unwrap();
            c.insert_many(vec![(k.clone(), vec![1.0, 2.0])]).unwrap();
        }
        let c = EmbeddingCache::open(&path).unwrap();
        assert_eq!(c.get(&k), Some(vec![1.0, 2.0]));
    }

    #[test]
    fn key_depends_on_model() {
        assert_ne!(EmbeddingCache::key("a", "x"), EmbeddingCache::key("b", "x"));
    }

    #[test]
    fn torn_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(
            &path,
            "{\"key\":\"a\",\"embedding\":[1.0]}\n{\"key\":\"b\",\"emb",
        )
        .unwrap();
        let c = EmbeddingCache::open(&path).unwrap();
        assert_eq!(c.len(), 1);
    }
}
