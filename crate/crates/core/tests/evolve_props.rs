mod common;

use std::collections::BTreeMap;

use grasp::evalx::SurrogateFitness;
use grasp::evolve::{
    crossover, diversity, evolve, inter_probability, mutate, mutate_at, random_genome,
    select_tournament, GaConfig, Gene, Genome, MutationKind,
};
use proptest::prelude::*;

fn sizes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..12, 2..10).prop_filter("pool needs at least 5 examples", |s| {
        s.iter().sum::<usize>() >= 5
    })
}

fn small_cfg(seed: u64) -> GaConfig {
    GaConfig {
        mu: 10,
        lambda: 20,
        max_generations: 6,
        eval_workers: 2,
        seed,
        ..GaConfig::default()
    }
}

proptest! {
    #[test]
    fn operators_preserve_validity(sizes in sizes(), seed in any::<u64>(), p_inter in 0.0f64..=1.0) {
        let pool = common::pool_with_sizes(&sizes);
        let mut rng = grasp::seed::rng(seed);
        let a = random_genome(&pool, 5, &mut rng).unwrap();
        let b = random_genome(&pool, 5, &mut rng).unwrap();
        prop_assert!(a.is_valid(&pool) && b.is_valid(&pool));
        let m = mutate(&a, &pool, p_inter, &mut rng);
        prop_assert!(m.is_valid(&pool));
        prop_assert!(m.genes().iter().zip(a.genes()).filter(|(x, y)| x != y).count() <= 1);
        let (c1, c2) = crossover(&a, &b, &pool, &mut rng);
        prop_assert!(c1.is_valid(&pool) && c2.is_valid(&pool));
        prop_assert_eq!(c1.len(), 5);
    }

    #[test]
    fn intra_mutation_keeps_the_cluster(sizes in sizes(), seed in any::<u64>(), pos in 0usize..5) {
        let pool = common::pool_with_sizes(&sizes);
        let mut rng = grasp::seed::rng(seed);
        let a = random_genome(&pool, 5, &mut rng).unwrap();
        let m = mutate_at(&a, &pool, pos, MutationKind::Intra, &mut rng);
        prop_assert_eq!(m.genes()[pos].cluster, a.genes()[pos].cluster);
    }

    #[test]
    fn diversity_and_p_inter_stay_in_range(sizes in sizes(), seed in any::<u64>()) {
        let pool = common::pool_with_sizes(&sizes);
        let mut rng = grasp::seed::rng(seed);
        let pop: Vec<Genome> = (0..8).map(|_| random_genome(&pool, 5, &mut rng).unwrap()).collect();
        let d = diversity(&pop, pool.n_clusters());
        prop_assert!((0.0..=1.0).contains(&d));
        let cfg = GaConfig::default();
        let p = inter_probability(d, &cfg);
        prop_assert!(p >= cfg.p_min - 1e-15 && p <= cfg.p_max + 1e-15);
    }

    #[test]
    fn runs_are_deterministic_and_elitist(seed in 0u64..1000) {
        let pool = common::pool_with_sizes(&[6, 5, 4, 7, 3, 8]);
        let fitness = SurrogateFitness::new(seed);
        let a = evolve(&pool, &fitness, &small_cfg(seed)).unwrap();
        let b = evolve(&pool, &fitness, &small_cfg(seed)).unwrap();
        prop_assert_eq!(&a.best, &b.best);
        prop_assert_eq!(a.trace.to_tsv(), b.trace.to_tsv());
        prop_assert!(a.best.is_valid(&pool));
        for w in a.trace.records.windows(2) {
            prop_assert!(w[1].best_fitness >= w[0].best_fitness);
        }
        prop_assert_eq!(a.best_fitness, a.trace.last().unwrap().best_fitness);
        prop_assert!(a.population.iter().all(|g| g.is_valid(&pool)));
    }
}

#[test]
fn inter_mutation_draws_replacements_uniformly() {
    let pool = common::pool_with_sizes(&[4, 4, 4, 4]);
    let genome = Genome::new(vec![Gene::new(0, 0)]);
    let mut rng = grasp::seed::rng(11);
    let draws = 30_000;
    let mut counts: BTreeMap<Gene, usize> = BTreeMap::new();
    for _ in 0..draws {
        let m = mutate_at(&genome, &pool, 0, MutationKind::Inter, &mut rng);
        *counts.entry(m.genes()[0]).or_default() += 1;
    }
    assert!(!counts.contains_key(&Gene::new(0, 0)));
    assert_eq!(counts.len(), 15);
    let expected = draws as f64 / 15.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 14 degrees of freedom, 0.1% critical value.
    assert!(chi2 < 36.12, "chi-square {chi2}");
}

#[test]
fn size_three_tournament_favours_the_top_half() {
    let fitness: Vec<f64> = (0..100).map(f64::from).collect();
    let mut rng = grasp::seed::rng(12);
    let winners = select_tournament(&fitness, 40_000, 3, &mut rng);
    let top = winners.iter().filter(|&&w| w >= 50).count() as f64 / winners.len() as f64;
    // Loses only if all three contestants come from the bottom half.
    assert!((top - 0.875).abs() < 0.01, "top-half share {top}");
}

#[test]
fn tournament_ties_go_to_the_first_sampled() {
    let fitness = vec![1.0; 10];
    let mut a = grasp::seed::rng(13);
    let mut b = grasp::seed::rng(13);
    let winners = select_tournament(&fitness, 50, 3, &mut a);
    use rand::Rng;
    let firsts: Vec<usize> = (0..50)
        .map(|_| {
            let first = b.random_range(0..10);
            b.random_range(0..10usize);
            b.random_range(0..10usize);
            first
        })
        .collect();
    assert_eq!(winners, firsts);
}
