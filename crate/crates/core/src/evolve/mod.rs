//! (μ+λ) genetic search over fixed-length genomes of `(cluster, example)`
//! genes.

mod engine;
mod operators;
mod trace;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::reduce::ClusteredPool;

pub use engine::{evolve, EvolveOutcome};
pub use operators::{
    crossover, crossover_at, mutate, mutate_at, random_genome, select_tournament, MutationKind,
};
pub use trace::{GenerationRecord, RunTrace, TraceParseError};

/// One demonstration slot: a cluster id and a position in that cluster's
/// member list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Gene {
    pub cluster: usize,
    pub example: usize,
}

impl Gene {
    pub fn new(cluster: usize, example: usize) -> Self {
        Self { cluster, example }
    }
}

impl fmt::Display for Gene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.cluster, self.example)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome {
    genes: Vec<Gene>,
}

impl Genome {
    pub fn new(genes: Vec<Gene>) -> Self {
        Self { genes }
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn has_duplicates(&self) -> bool {
        let set: BTreeSet<&Gene> = self.genes.iter().collect();
        set.len() != self.genes.len()
    }

    /// Every gene addresses an existing example and no gene repeats.
    pub fn is_valid(&self, pool: &ClusteredPool) -> bool {
        self.genes
            .iter()
            .all(|g| g.cluster < pool.n_clusters() && g.example < pool.cluster(g.cluster).len())
            && !self.has_duplicates()
    }

    /// Number of distinct clusters the genes touch.
    pub fn distinct_clusters(&self) -> usize {
        self.genes
            .iter()
            .map(|g| g.cluster)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// The examples in gene order.
    pub fn examples<'a>(&self, pool: &'a ClusteredPool) -> Vec<&'a Example> {
        self.genes
            .iter()
            .map(|g| pool.example_at(g.cluster, g.example))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub mu: usize,
    pub lambda: usize,
    pub max_generations: usize,
    pub p_cx: f64,
    pub p_mut: f64,
    pub tournament_size: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub warmup: usize,
    pub patience: usize,
    pub min_relative_improvement: f64,
    pub seed: u64,
    /// Genome length.
    pub shots: usize,
    /// Upper bound on concurrent fitness evaluations.
    pub eval_workers: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            mu: 80,
            lambda: 180,
            max_generations: 20,
            p_cx: 0.30,
            p_mut: 0.50,
            tournament_size: 3,
            p_min: 0.05,
            p_max: 0.70,
            warmup: 5,
            patience: 5,
            min_relative_improvement: 0.003,
            seed: 0,
            shots: 5,
            eval_workers: 8,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1], got {p}"))
            }
        };
        prob("p_cx", self.p_cx)?;
        prob("p_mut", self.p_mut)?;
        prob("p_min", self.p_min)?;
        prob("p_max", self.p_max)?;
        if self.p_cx + self.p_mut > 1.0 {
            return Err("p_cx + p_mut must not exceed 1".into());
        }
        if self.p_min > self.p_max {
            return Err("p_min must not exceed p_max".into());
        }
        if self.mu == 0 || self.lambda == 0 {
            return Err("mu and lambda must be at least 1".into());
        }
        if self.tournament_size == 0 {
            return Err("tournament_size must be at least 1".into());
        }
        if self.shots == 0 {
            return Err("shots must be at least 1".into());
        }
        if self.eval_workers == 0 {
            return Err("eval_workers must be at least 1".into());
        }
        if self.min_relative_improvement.is_nan() || self.min_relative_improvement < 0.0 {
            return Err("min_relative_improvement must be non-negative".into());
        }
        Ok(())
    }
}

/// Fraction of the pool's clusters that appear in at least one gene of the
/// population.
pub fn diversity(population: &[Genome], n_clusters: usize) -> f64 {
    assert!(n_clusters >= 1, "diversity needs at least one cluster");
    let seen: BTreeSet<usize> = population
        .iter()
        .flat_map(|g| g.genes.iter().map(|gene| gene.cluster))
        .collect();
    seen.len() as f64 / n_clusters as f64
}

/// Probability of an inter-cluster mutation at diversity `d`.
pub fn inter_probability(d: f64, cfg: &GaConfig) -> f64 {
    cfg.p_min + (cfg.p_max - cfg.p_min) * d
}

pub type FitnessError = Box<dyn std::error::Error + Send + Sync>;

/// Scores a genome against the pool it indexes. Higher is better.
pub trait Fitness: Sync {
    fn evaluate(&self, genome: &Genome, pool: &ClusteredPool) -> Result<f64, FitnessError>;
}

/// Adapts an infallible closure into a [`Fitness`].
pub struct FitnessFn<F>(pub F);

impl<F> Fitness for FitnessFn<F>
where
    F: Fn(&Genome, &ClusteredPool) -> f64 + Sync,
{
    fn evaluate(&self, genome: &Genome, pool: &ClusteredPool) -> Result<f64, FitnessError> {
        Ok((self.0)(genome, pool))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvolveError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("pool holds {available} examples but a genome needs {needed}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("fitness evaluation failed: {source}")]
    Fitness {
        #[source]
        source: FitnessError,
        trace: RunTrace,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genome(clusters: &[usize]) -> Genome {
        Genome::new(
            clusters
                .iter()
                .enumerate()
                .map(|(i, &c)| Gene::new(c, i))
                .collect(),
        )
    }

    #[test]
    fn diversity_counts_distinct_clusters() {
        assert_eq!(diversity(&[genome(&[3, 3, 3])], 10), 0.1);
        let pop = [genome(&[0, 1]), genome(&[1, 2]), genome(&[2, 0])];
        assert_eq!(diversity(&pop, 10), 0.3);
        assert_eq!(diversity(&[genome(&[0, 1, 2])], 3), 1.0);
    }

    #[test]
    fn inter_probability_endpoints() {
        let cfg = GaConfig::default();
        assert_eq!(inter_probability(0.0, &cfg), 0.05);
        assert_eq!(inter_probability(1.0, &cfg), 0.70);
        assert!((inter_probability(0.4, &cfg) - 0.31).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig {
            p_cx: 0.6,
            p_mut: 0.5,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            p_min: 0.8,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            mu: 0,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_reads_partial_toml() {
        let cfg: GaConfig = toml::from_str("mu = 20\nlambda = 40\n").unwrap();
        assert_eq!(cfg.mu, 20);
        assert_eq!(cfg.tournament_size, 3);
        assert!(toml::from_str::<GaConfig>("sigma = 1").is_err());
    }

    #[test]
    fn duplicates_detected() {
        let g = Genome::new(vec![Gene::new(0, 1), Gene::new(1, 0), Gene::new(0, 1)]);
        assert!(g.has_duplicates());
        assert_eq!(g.distinct_clusters(), 2);
    }
}
