use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub complete: bool,
    pub artifacts: Vec<Artifact>,
    pub seconds: f64,
    pub completed_at_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl RunManifest {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            stages: Vec::new(),
        }
    }

    /// Reads `dir/manifest.json`; a missing or unreadable file yields `None`.
    pub fn load(dir: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(
            &tmp,
            serde_json::to_string_pretty(self).expect("manifest serialises"),
        )?;
        std::fs::rename(tmp, dir.join(MANIFEST_FILE))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// True when the stage is marked complete and each artifact still exists
    /// with the recorded digest.
    pub fn is_valid(&self, name: &str, dir: &Path) -> bool {
        self.stage(name).is_some_and(|s| {
            s.complete
                && s.artifacts
                    .iter()
                    .all(|a| file_sha256(&dir.join(&a.path)).is_ok_and(|h| h == a.sha256))
        })
    }

    pub fn upsert(&mut self, record: StageRecord) {
        match self.stages.iter_mut().find(|s| s.name == record.name) {
            Some(s) => *s = record,
            None => self.stages.push(record),
        }
    }

    pub fn remove(&mut self, name: &str) {
        self.stages.retain(|s| s.name != name);
    }

    pub fn all_complete(&self) -> bool {
        self.stages.iter().all(|s| s.complete)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_tracks_artifact_contents() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "hello").unwrap();
        let mut m = RunManifest::new("h");
        m.upsert(StageRecord {
            name: "s".into(),
            complete: true,
            artifacts: vec![Artifact {
                path: "a.txt".into(),
                sha256: file_sha256(&dir.path().join("a.txt")).unwrap(),
            }],
            seconds: 0.1,
            completed_at_unix: 1,
        });
        assert!(m.is_valid("s", dir.path()));
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
        std::fs::write(dir.path().join("a.txt"), "changed").unwrap();
        assert!(!m.is_valid("s", dir.path()));
        std::fs::remove_file(dir.path().join("a.txt")).unwrap();
        assert!(!m.is_valid("s", dir.path()));
        assert!(!m.is_valid("other", dir.path()));
    }
}
