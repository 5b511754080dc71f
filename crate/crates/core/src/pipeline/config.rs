use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::evalx::PromptTemplate;
use crate::evolve::GaConfig;
use crate::generate::GenerationConfig;
use crate::llm::ClientConfig;
use crate::reduce::{ClusteringParams, ProjectionConfig, ProjectionMethod};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessMode {
    Llm,
    #[default]
    Surrogate,
}

impl std::str::FromStr for FitnessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(Self::Llm),
            "surrogate" => Ok(Self::Surrogate),
            other => Err(format!(
                "unknown fitness mode {other:?} (expected llm or surrogate)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Ready-made candidate records; when set, generation is skipped.
    pub examples: Option<PathBuf>,
    /// Unlabelled domain text that seeds generation.
    pub corpus: Option<PathBuf>,
    /// Characters per corpus chunk.
    pub chunk_size: Option<usize>,
    /// Held-out records for the final report.
    pub test: Option<PathBuf>,
    /// Label schema; inferred from the pool when absent.
    pub labels: Option<Vec<String>>,
}

pub const DEFAULT_CHUNK_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// The configured embedding endpoint.
    #[default]
    Service,
    /// In-process feature hashing; needs no network.
    Hashing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub source: EmbeddingSource,
    /// Width of hashed embeddings.
    pub dimension: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            source: EmbeddingSource::Service,
            dimension: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// File holding the task instruction; the built-in text is used when unset.
    pub instruction: Option<PathBuf>,
    /// Draws per random baseline.
    pub baseline_draws: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            instruction: None,
            baseline_draws: 3,
        }
    }
}

fn default_pool_sizes() -> Vec<usize> {
    vec![500, 5000]
}

fn default_n_validation() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub fitness: FitnessMode,
    #[serde(default = "default_pool_sizes")]
    pub pool_sizes: Vec<usize>,
    #[serde(default = "default_n_validation")]
    pub n_validation: usize,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub clustering: ClusteringParams,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub client: ClientConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

/// Replaces every `${NAME}` with the value of environment variable `NAME`.
pub fn interpolate_env(text: &str) -> Result<String, PipelineError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| PipelineError::Config("unterminated ${ in config".into()))?;
        let name = &after[..end];
        let value = std::env::var(name).map_err(|_| {
            PipelineError::Config(format!("environment variable {name} is not set"))
        })?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let text = interpolate_env(text)?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        for p in [
            &mut self.data.examples,
            &mut self.data.corpus,
            &mut self.data.test,
            &mut self.evaluation.instruction,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        if let ProjectionMethod::PrecomputedImport { path } = &mut self.projection.method {
            resolve(base, path);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        let exists = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        match (&self.data.examples, &self.data.corpus) {
            (Some(p), _) => exists(p, "examples file")?,
            (None, Some(p)) => {
                exists(p, "corpus file")?;
                if self.data.labels.as_ref().is_none_or(|l| l.is_empty()) {
                    return err("generation from a corpus needs data.labels".into());
                }
                self.generation
                    .validate()
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
            }
            (None, None) => return err("set data.examples or data.corpus".into()),
        }
        if let Some(p) = &self.data.test {
            exists(p, "test file")?;
        }
        if let Some(p) = &self.evaluation.instruction {
            exists(p, "instruction file")?;
        }
        if let ProjectionMethod::PrecomputedImport { path } = &self.projection.method {
            exists(path, "projection file")?;
        }
        if self.data.chunk_size == Some(0) {
            return err("data.chunk_size must be positive".into());
        }
        if self.pool_sizes.is_empty() {
            return err("pool_sizes must list at least one size".into());
        }
        if let Some(&k) = self.pool_sizes.iter().find(|&&k| k < self.ga.shots) {
            return err(format!(
                "pool size {k} is smaller than the shot count {}",
                self.ga.shots
            ));
        }
        let mut sorted = self.pool_sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.pool_sizes.len() {
            return err("pool_sizes must be distinct".into());
        }
        if self.fitness == FitnessMode::Llm && self.n_validation == 0 {
            return err("llm fitness needs n_validation >= 1".into());
        }
        if self.embedding.dimension < 2 {
            return err("embedding.dimension must be at least 2".into());
        }
        if self.evaluation.baseline_draws == 0 {
            return err("evaluation.baseline_draws must be at least 1".into());
        }
        self.clustering
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.ga.validate().map_err(PipelineError::Config)?;
        self.client.validate().map_err(PipelineError::Config)?;
        Ok(())
    }

    pub fn template(&self) -> Result<PromptTemplate, PipelineError> {
        match &self.evaluation.instruction {
            None => Ok(PromptTemplate::default()),
            Some(p) => std::fs::read_to_string(p)
                .map(|instruction| PromptTemplate { instruction })
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display()))),
        }
    }

    /// Digest of the settings and of every input file's contents.
    pub fn snapshot_hash(&self) -> Result<String, PipelineError> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serialises"));
        let mut inputs = vec![
            &self.data.examples,
            &self.data.corpus,
            &self.data.test,
            &self.evaluation.instruction,
        ];
        let import = match &self.projection.method {
            ProjectionMethod::PrecomputedImport { path } => Some(path.clone()),
            _ => None,
        };
        inputs.push(&import);
        for p in inputs.into_iter().flatten() {
            let bytes = std::fs::read(p)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            h.update(Sha256::digest(&bytes));
        }
        Ok(hex::encode(h.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = PipelineConfig::parse(
            "output_dir = \"out\"\n[data]\nexamples = \"pool.jsonl\"\n",
            Path::new("/tmp/x"),
        )
        .unwrap();
        assert_eq!(cfg.pool_sizes, vec![500, 5000]);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x/out"));
        assert_eq!(cfg.data.examples, Some(PathBuf::from("/tmp/x/pool.jsonl")));
        assert_eq!(cfg.ga.mu, 80);
        assert_eq!(cfg.clustering.min_cluster_size, 9);
        assert_eq!(cfg.fitness, FitnessMode::Surrogate);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::parse("output_dir = \"o\"\ncolour = 1\n", Path::new(".")).is_err());
        assert!(
            PipelineConfig::parse("output_dir = \"o\"\n[ga]\nsigma = 1\n", Path::new(".")).is_err()
        );
    }

    #[test]
    fn env_interpolation() {
        std::env::set_var("GRASP_TEST_ENDPOINT", "http://example.invalid/v1");
        let out = interpolate_env("endpoint = \"${GRASP_TEST_ENDPOINT}\" # ok").unwrap();
        assert_eq!(out, "endpoint = \"http://example.invalid/v1\" # ok");
        assert!(interpolate_env("x = \"${GRASP_TEST_SURELY_UNSET_VAR}\"").is_err());
        assert!(interpolate_env("x = \"${OPEN").is_err());
    }

    #[test]
    fn validation_catches_missing_paths_and_small_pools() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::parse(
            "output_dir = \"o\"\n[data]\nexamples = \"missing.jsonl\"\n",
            dir.path(),
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        std::fs::write(dir.path().join("missing.jsonl"), "").unwrap();
        assert!(cfg.validate().is_ok());
        cfg.pool_sizes = vec![3];
        assert!(cfg.validate().is_err());
    }
}
