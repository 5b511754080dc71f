use std::sync::Arc;

use crate::corpus::Example;
use crate::evolve::{Fitness, FitnessError, Genome};
use crate::reduce::ClusteredPool;
use crate::seed;

type Quality = dyn Fn(&Example) -> f64 + Send + Sync;

/// Offline fitness rewarding cluster coverage and per-example quality:
/// `0.5 * distinct_clusters / len + 0.5 * mean(quality)`.
///
/// Quality defaults to a seeded hash of the example id in `[0, 1)`.
#[derive(Clone)]
pub struct SurrogateFitness {
    seed: u64,
    quality: Option<Arc<Quality>>,
}

impl SurrogateFitness {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            quality: None,
        }
    }

    /// Replaces the hashed quality with `quality`.
    pub fn with_quality(
        mut self,
        quality: impl Fn(&Example) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.quality = Some(Arc::new(quality));
        self
    }

    pub fn quality(&self, example: &Example) -> f64 {
        match &self.quality {
            Some(q) => q(example),
            None => seed::unit_hash(self.seed, &example.id),
        }
    }

    pub fn score(&self, genome: &Genome, pool: &ClusteredPool) -> f64 {
        let len = genome.len() as f64;
        let coverage = genome.distinct_clusters() as f64 / len;
        let quality: f64 = genome
            .examples(pool)
            .into_iter()
            .map(|e| self.quality(e))
            .sum::<f64>()
            / len;
        0.5 * coverage + 0.5 * quality
    }
}

impl std::fmt::Debug for SurrogateFitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurrogateFitness")
            .field("seed", &self.seed)
            .field("custom_quality", &self.quality.is_some())
            .finish()
    }
}

impl Fitness for SurrogateFitness {
    fn evaluate(&self, genome: &Genome, pool: &ClusteredPool) -> Result<f64, FitnessError> {
        Ok(self.score(genome, pool))
    }
}

pub fn evaluate_genome_surrogate(genome: &Genome, pool: &ClusteredPool, seed: u64) -> f64 {
    SurrogateFitness::new(seed).score(genome, pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use crate::evolve::Gene;

    fn pool() -> ClusteredPool {
        let examples = (0..10)
            .map(|i| {
                Example::new(format!("x{i}"), "t", Default::default(), Provenance::Human).unwrap()
            })
            .collect::<Vec<_>>();
        ClusteredPool::from_labels(examples, &[0, 0, 0, 0, 0, 1, 2, 3, 4, 5])
    }

    #[test]
    fn maximum_is_one() {
        let f = SurrogateFitness::new(0).with_quality(|_| 1.0);
        let g = Genome::new((1..6).map(|c| Gene::new(c, 0)).collect());
        assert_eq!(f.score(&g, &pool()), 1.0);
    }

    #[test]
    fn single_cluster_zero_quality() {
        let f = SurrogateFitness::new(0).with_quality(|_| 0.0);
        let g = Genome::new((0..5).map(|e| Gene::new(0, e)).collect());
        assert!((f.score(&g, &pool()) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn order_independent_and_seeded() {
        let p = pool();
        let g = Genome::new(vec![Gene::new(0, 1), Gene::new(3, 0), Gene::new(0, 4)]);
        let r = Genome::new(vec![Gene::new(0, 4), Gene::new(0, 1), Gene::new(3, 0)]);
        assert_eq!(
            evaluate_genome_surrogate(&g, &p, 9),
            evaluate_genome_surrogate(&r, &p, 9)
        );
        assert_ne!(
            evaluate_genome_surrogate(&g, &p, 9),
            evaluate_genome_surrogate(&g, &p, 10)
        );
        let v = evaluate_genome_surrogate(&g, &p, 9);
        assert!((0.0..=1.0).contains(&v));
    }
}
