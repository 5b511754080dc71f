//! Evolutionary selection of a fixed few-shot demonstration set.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Generate** ([`generate`]): an LLM writes a large pool of labelled,
//!    sentence-level candidate examples from randomly sampled corpus chunks,
//!    using one stream for positive and one for negative examples.
//! 2. **Reduce** ([`reduce`]): candidates are embedded, projected to a low
//!    dimension, clustered with HDBSCAN, stripped of noise and sampled
//!    round-robin over clusters into pools of size `k`.
//! 3. **Select** ([`evolve`]): a (μ+λ) genetic algorithm searches over
//!    genomes of `(cluster, example)` genes, with a mutation operator whose
//!    inter-cluster probability tracks population diversity.
//!
//! Fitness comes from [`evalx`], either a set-based extraction metric computed
//! on LLM output or an offline surrogate. [`pipeline`] wires the stages
//! together behind a resumable manifest.

pub mod concurrency;
pub mod corpus;
pub mod evalx;
pub mod evolve;
pub mod generate;
pub mod llm;
pub mod pipeline;
pub mod reduce;
pub mod seed;

pub use corpus::{Example, Provenance};
pub use evolve::{GaConfig, Gene, Genome, RunTrace};
pub use reduce::{ClusteredPool, ClusteringParams};
