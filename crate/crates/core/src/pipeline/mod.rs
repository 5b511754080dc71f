//! Config-driven orchestration of all stages behind a resumable manifest.

mod baseline;
mod config;
mod manifest;
pub mod plot;
mod run;

pub use baseline::{baseline_random, uniform_genome, BaselineError, BaselineSummary};
pub use config::{
    interpolate_env, DataConfig, EmbeddingConfig, EmbeddingSource, EvaluationConfig, FitnessMode,
    PipelineConfig, DEFAULT_CHUNK_SIZE,
};
pub use manifest::{file_sha256, Artifact, RunManifest, StageRecord, MANIFEST_FILE};
pub use run::{plot_traces, read_pool_file, run_pipeline, BestGene, BestGenomeFile, Group};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("stage {stage}: model client failed: {message}")]
    Client { stage: String, message: String },
}

impl PipelineError {
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_STAGE: i32 = 3;
    pub const EXIT_CLIENT: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => Self::EXIT_CONFIG,
            PipelineError::Stage { .. } => Self::EXIT_STAGE,
            PipelineError::Client { .. } => Self::EXIT_CLIENT,
        }
    }

    pub(crate) fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage: stage.to_owned(),
            message: e.to_string(),
        }
    }

    pub(crate) fn client(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Client {
            stage: stage.to_owned(),
            message: e.to_string(),
        }
    }
}
