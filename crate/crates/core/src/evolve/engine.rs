use std::collections::HashMap;

use rand::Rng;

use super::operators::{crossover, mutate, random_genome, select_tournament};
use super::trace::{GenerationRecord, RunTrace};
use super::{diversity, inter_probability, EvolveError, Fitness, GaConfig, Genome};
use crate::concurrency::bounded_map;
use crate::reduce::ClusteredPool;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub best: Genome,
    pub best_fitness: f64,
    pub trace: RunTrace,
    /// Final parent population, fittest first.
    pub population: Vec<Genome>,
}

struct Evaluator<'a, F: Fitness + ?Sized> {
    fitness: &'a F,
    pool: &'a ClusteredPool,
    workers: usize,
    cache: HashMap<Genome, f64>,
}

impl<F: Fitness + ?Sized> Evaluator<'_, F> {
    /// Scores every genome, evaluating each distinct uncached one once.
    /// Returns the scores and the number of fresh evaluations.
    fn score(&mut self, genomes: &[Genome]) -> Result<(Vec<f64>, usize), super::FitnessError> {
        let mut fresh: Vec<Genome> = Vec::new();
        for g in genomes {
            if !self.cache.contains_key(g) && !fresh.contains(g) {
                fresh.push(g.clone());
            }
        }
        let results = bounded_map(&fresh, self.workers, |_, g| {
            self.fitness.evaluate(g, self.pool)
        });
        for (g, r) in fresh.iter().zip(results) {
            self.cache.insert(g.clone(), r?);
        }
        Ok((genomes.iter().map(|g| self.cache[g]).collect(), fresh.len()))
    }
}

fn record(
    generation: usize,
    parents: &[Genome],
    fitness: &[f64],
    pool: &ClusteredPool,
    cfg: &GaConfig,
    evaluations: usize,
) -> GenerationRecord {
    let d = diversity(parents, pool.n_clusters());
    GenerationRecord {
        generation,
        mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
        best_fitness: fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        diversity: d,
        p_inter: inter_probability(d, cfg),
        evaluations,
    }
}

/// Early-stop state: after the warm-up, each generation compares the best
/// fitness with the best `patience` generations earlier.
struct Stopper {
    stale: usize,
}

impl Stopper {
    fn should_stop(&mut self, trace: &RunTrace, cfg: &GaConfig) -> bool {
        let g = trace.records.len() - 1;
        if cfg.patience == 0 || g <= cfg.warmup || g < cfg.patience {
            return false;
        }
        let new = trace.records[g].best_fitness;
        let old = trace.records[g - cfg.patience].best_fitness;
        let rel = (new - old) / old.abs().max(1e-12);
        if rel < cfg.min_relative_improvement {
            self.stale += 1;
        } else {
            self.stale = 0;
        }
        self.stale >= cfg.patience
    }
}

/// Runs the (μ+λ) search and returns the best genome found.
pub fn evolve<F: Fitness + ?Sized>(
    pool: &ClusteredPool,
    fitness: &F,
    cfg: &GaConfig,
) -> Result<EvolveOutcome, EvolveError> {
    cfg.validate().map_err(EvolveError::Config)?;
    if pool.len() < cfg.shots {
        return Err(EvolveError::PoolTooSmall {
            needed: cfg.shots,
            available: pool.len(),
        });
    }
    let mut rng = seed::rng(cfg.seed);
    let mut eval = Evaluator {
        fitness,
        pool,
        workers: cfg.eval_workers,
        cache: HashMap::new(),
    };
    let mut trace = RunTrace::default();
    let fail = |source, trace: &RunTrace| EvolveError::Fitness {
        source,
        trace: trace.clone(),
    };

    let mut parents: Vec<Genome> = (0..cfg.mu)
        .map(|_| random_genome(pool, cfg.shots, &mut rng).expect("pool size checked"))
        .collect();
    let (mut parent_fit, n) = eval.score(&parents).map_err(|e| fail(e, &trace))?;
    trace
        .records
        .push(record(0, &parents, &parent_fit, pool, cfg, n));

    let mut stopper = Stopper { stale: 0 };
    for generation in 1..=cfg.max_generations {
        if stopper.should_stop(&trace, cfg) {
            break;
        }
        let p_inter = trace.records.last().expect("generation 0 recorded").p_inter;
        let mut offspring = Vec::with_capacity(cfg.lambda);
        for _ in 0..cfg.lambda {
            let r: f64 = rng.random();
            let child = if r < cfg.p_cx {
                let pair = select_tournament(&parent_fit, 2, cfg.tournament_size, &mut rng);
                crossover(&parents[pair[0]], &parents[pair[1]], pool, &mut rng).0
            } else if r < cfg.p_cx + cfg.p_mut {
                let i = select_tournament(&parent_fit, 1, cfg.tournament_size, &mut rng)[0];
                mutate(&parents[i], pool, p_inter, &mut rng)
            } else {
                let i = select_tournament(&parent_fit, 1, cfg.tournament_size, &mut rng)[0];
                parents[i].clone()
            };
            offspring.push(child);
        }
        let (offspring_fit, n) = eval.score(&offspring).map_err(|e| fail(e, &trace))?;

        let mut union: Vec<(Genome, f64)> = parents
            .into_iter()
            .zip(parent_fit)
            .chain(offspring.into_iter().zip(offspring_fit))
            .collect();
        // Stable sort keeps parents ahead of equally fit offspring.
        union.sort_by(|a, b| b.1.total_cmp(&a.1));
        union.truncate(cfg.mu);
        (parents, parent_fit) = union.into_iter().unzip();
        trace
            .records
            .push(record(generation, &parents, &parent_fit, pool, cfg, n));
    }

    let best_idx = (0..parents.len()).fold(0, |best, i| {
        if parent_fit[i] > parent_fit[best] {
            i
        } else {
            best
        }
    });
    let mut order: Vec<usize> = (0..parents.len()).collect();
    order.sort_by(|&a, &b| parent_fit[b].total_cmp(&parent_fit[a]));
    Ok(EvolveOutcome {
        best: parents[best_idx].clone(),
        best_fitness: parent_fit[best_idx],
        trace,
        population: order.into_iter().map(|i| parents[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Example, Provenance};
    use crate::evolve::FitnessFn;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn pool(clusters: usize, size: usize) -> ClusteredPool {
        let labels: Vec<usize> = (0..clusters)
            .flat_map(|c| std::iter::repeat_n(c, size))
            .collect();
        let examples = (0..labels.len())
            .map(|i| {
                Example::new(
                    format!("x{i}"),
                    format!("t{i}"),
                    Default::default(),
                    Provenance::Human,
                )
                .unwrap()
            })
            .collect();
        ClusteredPool::from_labels(examples, &labels)
    }

    fn small_cfg() -> GaConfig {
        GaConfig {
            mu: 20,
            lambda: 40,
            max_generations: 15,
            seed: 11,
            ..GaConfig::default()
        }
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let p = pool(6, 5);
        let cfg = GaConfig {
            max_generations: 0,
            ..small_cfg()
        };
        let out = evolve(
            &p,
            &FitnessFn(|g: &Genome, _: &ClusteredPool| g.distinct_clusters() as f64),
            &cfg,
        )
        .unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.best_fitness, out.trace.records[0].best_fitness);
    }

    #[test]
    fn constant_fitness_stops_at_generation_ten() {
        let p = pool(6, 5);
        let out = evolve(
            &p,
            &FitnessFn(|_: &Genome, _: &ClusteredPool| 0.5),
            &small_cfg(),
        )
        .unwrap();
        assert_eq!(out.trace.last().unwrap().generation, 10);
    }

    #[test]
    fn distinct_cluster_fitness_reaches_optimum() {
        let p = pool(12, 15);
        let cfg = GaConfig {
            max_generations: 20,
            ..small_cfg()
        };
        let out = evolve(
            &p,
            &FitnessFn(|g: &Genome, _: &ClusteredPool| g.distinct_clusters() as f64),
            &cfg,
        )
        .unwrap();
        assert_eq!(out.best_fitness, 5.0);
        assert_eq!(out.best.distinct_clusters(), 5);
    }

    #[test]
    fn identical_genomes_evaluated_once() {
        let p = pool(2, 3);
        let calls = AtomicUsize::new(0);
        let f = FitnessFn(|g: &Genome, _: &ClusteredPool| {
            calls.fetch_add(1, Ordering::SeqCst);
            g.genes()[0].example as f64
        });
        let cfg = GaConfig {
            shots: 2,
            ..small_cfg()
        };
        let out = evolve(&p, &f, &cfg).unwrap();
        // Six examples give 30 ordered duplicate-free genomes.
        assert!(calls.load(Ordering::SeqCst) <= 30);
        assert_eq!(out.trace.total_evaluations(), calls.load(Ordering::SeqCst));
    }

    #[test]
    fn failure_keeps_trace() {
        struct Flaky(AtomicUsize);
        impl Fitness for Flaky {
            fn evaluate(
                &self,
                g: &Genome,
                _: &ClusteredPool,
            ) -> Result<f64, crate::evolve::FitnessError> {
                if self.0.fetch_add(1, Ordering::SeqCst) >= 20 {
                    Err("backend down".into())
                } else {
                    Ok(g.distinct_clusters() as f64)
                }
            }
        }
        let p = pool(10, 10);
        let cfg = GaConfig {
            eval_workers: 1,
            ..small_cfg()
        };
        match evolve(&p, &Flaky(AtomicUsize::new(0)), &cfg) {
            Err(EvolveError::Fitness { trace, .. }) => assert_eq!(trace.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_small_pool_rejected() {
        let p = pool(1, 3);
        let r = evolve(
            &p,
            &FitnessFn(|_: &Genome, _: &ClusteredPool| 0.0),
            &small_cfg(),
        );
        assert!(matches!(
            r,
            Err(EvolveError::PoolTooSmall {
                needed: 5,
                available: 3
            })
        ));
    }
}
