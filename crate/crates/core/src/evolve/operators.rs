use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Gene, Genome};
use crate::reduce::ClusteredPool;

const MAX_TRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    Inter,
    Intra,
}

fn uniform_gene<R: Rng + ?Sized>(pool: &ClusteredPool, rng: &mut R) -> Gene {
    let cluster = rng.random_range(0..pool.n_clusters());
    let example = rng.random_range(0..pool.cluster(cluster).len());
    Gene::new(cluster, example)
}

/// Draws a duplicate-free genome gene by gene, cluster uniform over clusters
/// and example uniform within the cluster. Returns `None` when the pool has
/// fewer than `shots` examples.
pub fn random_genome<R: Rng + ?Sized>(
    pool: &ClusteredPool,
    shots: usize,
    rng: &mut R,
) -> Option<Genome> {
    if pool.len() < shots || pool.n_clusters() == 0 {
        return None;
    }
    let mut genes: Vec<Gene> = Vec::with_capacity(shots);
    while genes.len() < shots {
        let mut gene = None;
        for _ in 0..MAX_TRIES {
            let g = uniform_gene(pool, rng);
            if !genes.contains(&g) {
                gene = Some(g);
                break;
            }
        }
        let g = match gene {
            Some(g) => g,
            None => {
                let free: Vec<Gene> = all_genes(pool).filter(|g| !genes.contains(g)).collect();
                *free.choose(rng)?
            }
        };
        genes.push(g);
    }
    Some(Genome::new(genes))
}

fn all_genes(pool: &ClusteredPool) -> impl Iterator<Item = Gene> + '_ {
    (0..pool.n_clusters())
        .flat_map(move |c| (0..pool.cluster(c).len()).map(move |e| Gene::new(c, e)))
}

/// Mutates one uniformly chosen gene; the mutation is inter-cluster with
/// probability `p_inter` and intra-cluster otherwise.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    pool: &ClusteredPool,
    p_inter: f64,
    rng: &mut R,
) -> Genome {
    let position = rng.random_range(0..genome.len());
    let kind = if rng.random::<f64>() < p_inter {
        MutationKind::Inter
    } else {
        MutationKind::Intra
    };
    mutate_at(genome, pool, position, kind, rng)
}

/// Replaces the gene at `position`. Inter-cluster mutation resamples both the
/// cluster and the example; intra-cluster resamples the example only. The
/// replacement must differ from every gene already in the genome. If no such
/// replacement is found the genome is returned unchanged.
pub fn mutate_at<R: Rng + ?Sized>(
    genome: &Genome,
    pool: &ClusteredPool,
    position: usize,
    kind: MutationKind,
    rng: &mut R,
) -> Genome {
    let mut genes = genome.genes().to_vec();
    let replacement = match kind {
        MutationKind::Inter => (0..MAX_TRIES)
            .map(|_| uniform_gene(pool, rng))
            .find(|g| !genes.contains(g)),
        MutationKind::Intra => intra_alternative(&genes, genes[position].cluster, pool, rng),
    };
    if let Some(g) = replacement {
        genes[position] = g;
    }
    Genome::new(genes)
}

fn intra_alternative<R: Rng + ?Sized>(
    genes: &[Gene],
    cluster: usize,
    pool: &ClusteredPool,
    rng: &mut R,
) -> Option<Gene> {
    let taken: BTreeSet<usize> = genes
        .iter()
        .filter(|g| g.cluster == cluster)
        .map(|g| g.example)
        .collect();
    let free: Vec<usize> = (0..pool.cluster(cluster).len())
        .filter(|e| !taken.contains(e))
        .collect();
    free.choose(rng).map(|&e| Gene::new(cluster, e))
}

/// Two-point crossover with cut points drawn uniformly from `0..=len`.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    pool: &ClusteredPool,
    rng: &mut R,
) -> (Genome, Genome) {
    let len = a.len();
    let i = rng.random_range(0..=len);
    let mut j = rng.random_range(0..len);
    if j >= i {
        j += 1;
    }
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    crossover_at(a, b, i, j, pool, rng)
}

/// Swaps genes in `[i, j)` between the parents, then repairs duplicates.
pub fn crossover_at<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    i: usize,
    j: usize,
    pool: &ClusteredPool,
    rng: &mut R,
) -> (Genome, Genome) {
    assert_eq!(a.len(), b.len(), "crossover needs equal-length parents");
    assert!(i <= j && j <= a.len(), "cut points out of range");
    let mut c1 = a.genes().to_vec();
    let mut c2 = b.genes().to_vec();
    c1[i..j].copy_from_slice(&b.genes()[i..j]);
    c2[i..j].copy_from_slice(&a.genes()[i..j]);
    let c1 = repair(c1, pool, rng).unwrap_or_else(|| a.clone());
    let c2 = repair(c2, pool, rng).unwrap_or_else(|| b.clone());
    (c1, c2)
}

/// Resamples, within its cluster, every gene that repeats an earlier one.
fn repair<R: Rng + ?Sized>(
    mut genes: Vec<Gene>,
    pool: &ClusteredPool,
    rng: &mut R,
) -> Option<Genome> {
    for p in 1..genes.len() {
        if genes[..p].contains(&genes[p]) {
            genes[p] = intra_alternative(&genes, genes[p].cluster, pool, rng)?;
        }
    }
    Some(Genome::new(genes))
}

/// Returns `n` winner indices. Each tournament samples `size` contestants
/// with replacement and keeps the fittest; on ties the first sampled wins.
pub fn select_tournament<R: Rng + ?Sized>(
    fitness: &[f64],
    n: usize,
    size: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(!fitness.is_empty() && size >= 1);
    (0..n)
        .map(|_| {
            let mut best = rng.random_range(0..fitness.len());
            for _ in 1..size {
                let c = rng.random_range(0..fitness.len());
                if fitness[c] > fitness[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
