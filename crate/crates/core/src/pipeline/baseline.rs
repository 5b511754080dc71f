use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::evolve::{Fitness, FitnessError, Gene, Genome};
use crate::reduce::ClusteredPool;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single draw.
    pub std: f64,
}

impl BaselineSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { values, mean, std }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("pool holds {available} examples, fewer than {shots} shots")]
    PoolTooSmall { shots: usize, available: usize },
    #[error("n_draws must be at least 1")]
    NoDraws,
    #[error("fitness evaluation failed: {0}")]
    Fitness(FitnessError),
}

/// A genome of `shots` distinct examples drawn uniformly from the pool.
pub fn uniform_genome<R: rand::Rng + ?Sized>(
    pool: &ClusteredPool,
    shots: usize,
    rng: &mut R,
) -> Genome {
    let genes = sample(rng, pool.len(), shots)
        .into_iter()
        .map(|i| {
            let c = pool.cluster_of(i);
            let e = pool
                .cluster(c)
                .binary_search(&i)
                .expect("member listed in its cluster");
            Gene::new(c, e)
        })
        .collect();
    Genome::new(genes)
}

/// Scores `n_draws` independent uniform genomes.
pub fn baseline_random<F: Fitness + ?Sized>(
    pool: &ClusteredPool,
    shots: usize,
    n_draws: usize,
    fitness: &F,
    seed: u64,
) -> Result<BaselineSummary, BaselineError> {
    if n_draws == 0 {
        return Err(BaselineError::NoDraws);
    }
    if pool.len() < shots {
        return Err(BaselineError::PoolTooSmall {
            shots,
            available: pool.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let genomes: Vec<Genome> = (0..n_draws)
        .map(|_| uniform_genome(pool, shots, &mut rng))
        .collect();
    let values = genomes
        .iter()
        .map(|g| fitness.evaluate(g, pool))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(BaselineError::Fitness)?;
    Ok(BaselineSummary::from_values(values))
}
