mod common;

use grasp::reduce::hdbscan::mutual_reachability_mst;
use grasp::reduce::{build_pool, cluster, ClusteringParams};
use proptest::prelude::*;

fn sizes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..40, 1..15)
}

proptest! {
    #[test]
    fn round_robin_is_water_filling(sizes in sizes(), k in 1usize..300) {
        let pool = common::pool_with_sizes(&sizes);
        let got = build_pool(&pool, k).contributions(&pool);
        prop_assert_eq!(got.iter().sum::<usize>(), k.min(pool.len()));
        let cap = *got.iter().max().unwrap();
        for (g, s) in got.iter().zip(&sizes) {
            prop_assert!(g <= s);
            prop_assert!(*g == *s || g + 1 >= cap, "sizes {:?} k {} got {:?}", sizes, k, got);
        }
    }

    #[test]
    fn round_robin_selection_is_duplicate_free(sizes in sizes(), k in 1usize..300) {
        let pool = common::pool_with_sizes(&sizes);
        let sub = build_pool(&pool, k).materialize(&pool);
        let mut ids: Vec<&str> = sub.examples().iter().map(|e| e.id.as_str()).collect();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }

    #[test]
    fn clustering_is_translation_invariant(shift in prop::collection::vec(-64i32..64, 2), seed in 0u64..50) {
        // Dyadic offsets keep the shifted coordinates' distances bit-identical.
        let (points, _) = common::blobs(3, 12, 2, 0.5, seed);
        let snap = |x: f64| (x * 256.0).round() / 256.0;
        let points: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|&x| snap(x)).collect()).collect();
        let moved: Vec<Vec<f64>> = points.iter().map(|p| vec![p[0] + shift[0] as f64 * 0.5, p[1] + shift[1] as f64 * 0.5]).collect();
        let params = ClusteringParams { min_cluster_size: 5, min_samples: 1, cluster_selection_epsilon: 2.0 };
        prop_assert_eq!(cluster(&points, &params).unwrap(), cluster(&moved, &params).unwrap());
    }

    #[test]
    fn mst_is_spanning_with_minimal_total(n in 2usize..25, min_samples in 1usize..4, seed in any::<u64>()) {
        prop_assume!(min_samples <= n);
        let (points, _) = common::blobs(1, n, 3, 5.0, seed);
        let edges = mutual_reachability_mst(&points, min_samples);
        prop_assert_eq!(edges.len(), n - 1);
        // Total weight must match Kruskal over the same pairwise weights.
        let core = grasp::reduce::hdbscan::core_distances(&points, min_samples);
        let mut all = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                all.push((grasp::reduce::hdbscan::mutual_reachability(&points, &core, a, b), a, b));
            }
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut Vec<usize>, x: usize) -> usize { if p[x] == x { x } else { let r = root(p, p[x]); p[x] = r; r } }
        let mut kruskal = 0.0;
        for (w, a, b) in all {
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra != rb { parent[ra] = rb; kruskal += w; }
        }
        let total: f64 = edges.iter().map(|e| e.weight).sum();
        prop_assert!((total - kruskal).abs() <= 1e-9 * kruskal.max(1.0));
    }
}

/// Connected components after joining every pair closer than `eps`; with
/// `min_samples = 1` this is the single-linkage dendrogram cut at `eps`.
fn single_linkage_components(points: &[Vec<f64>], eps: f64) -> Vec<usize> {
    let n = points.len();
    let mut comp: Vec<usize> = (0..n).collect();
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if dist(&points[a], &points[b]) <= eps && comp[a] != comp[b] {
                    let m = comp[a].min(comp[b]);
                    comp[a] = m;
                    comp[b] = m;
                    changed = true;
                }
            }
        }
        if !changed {
            return comp;
        }
    }
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn two_blobs_match_the_single_linkage_oracle() {
    for seed in 0..10 {
        let (points, _) = common::blobs(2, 20, 2, 0.5, seed);
        let oracle = single_linkage_components(&points, 3.0);
        let mut groups = oracle.clone();
        groups.sort();
        groups.dedup();
        assert_eq!(
            groups.len(),
            2,
            "seed {seed}: oracle found {} components",
            groups.len()
        );
        let params = ClusteringParams {
            min_cluster_size: 5,
            min_samples: 1,
            cluster_selection_epsilon: 3.0,
        };
        let got = cluster(&points, &params).unwrap();
        assert_eq!(got.n_clusters, 2);
        let labels: Vec<usize> = got.labels.iter().map(|l| l.expect("no noise")).collect();
        assert!(same_partition(&labels, &oracle), "seed {seed}");
    }
}
