//! HDBSCAN over Euclidean points with leaf cluster selection and an
//! epsilon merge threshold.
//!
//! Steps: core distances at `min_samples`, a minimum spanning tree over
//! mutual-reachability distances (Prim, dense), the single-linkage
//! hierarchy, its condensation at `min_cluster_size`, leaf selection, and the
//! epsilon merge that replaces leaves born below the threshold with their
//! nearest ancestor born above it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReduceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub cluster_selection_epsilon: f64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 9,
            min_samples: 1,
            cluster_selection_epsilon: 0.18,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<(), ReduceError> {
        if self.min_cluster_size < 2 {
            return Err(ReduceError::Params(
                "min_cluster_size must be at least 2".into(),
            ));
        }
        if self.min_samples < 1 {
            return Err(ReduceError::Params("min_samples must be at least 1".into()));
        }
        if !self.cluster_selection_epsilon.is_finite() || self.cluster_selection_epsilon < 0.0 {
            return Err(ReduceError::Params(
                "cluster_selection_epsilon must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Cluster label per input point; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

impl Assignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from each point to its `min_samples`-th nearest neighbour,
/// counting the point itself as the first. `min_samples = 1` gives zeros.
pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = points.len();
    if n == 0 || min_samples <= 1 {
        return vec![0.0; n];
    }
    let k = min_samples.min(n) - 1;
    points
        .par_iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(p, q)).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k, f64::total_cmp);
            *kth
        })
        .collect()
}

pub fn mutual_reachability(points: &[Vec<f64>], core: &[f64], a: usize, b: usize) -> f64 {
    euclidean(&points[a], &points[b]).max(core[a]).max(core[b])
}

/// Minimum spanning tree of the complete mutual-reachability graph, edges
/// sorted by weight (stable, so equal weights keep discovery order).
pub fn mutual_reachability_mst(points: &[Vec<f64>], min_samples: usize) -> Vec<MstEdge> {
    let core = core_distances(points, min_samples);
    prim(points, &core)
}

fn prim(points: &[Vec<f64>], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    // (in_tree, best weight to tree, tree endpoint)
    let mut state: Vec<(bool, f64, usize)> = vec![(false, f64::INFINITY, 0); n];
    state[0].0 = true;
    let mut current = 0;
    let mut edges = Vec::with_capacity(n - 1);
    const PAR_THRESHOLD: usize = 2048;
    for _ in 1..n {
        let relax = |(i, s): (usize, &mut (bool, f64, usize))| {
            if s.0 {
                return None;
            }
            let w = mutual_reachability(points, core, current, i);
            if w < s.1 {
                s.1 = w;
                s.2 = current;
            }
            Some((s.1, i))
        };
        let pick = |a: Option<(f64, usize)>, b: Option<(f64, usize)>| match (a, b) {
            (None, x) | (x, None) => x,
            (Some(x), Some(y)) => {
                if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                    Some(y)
                } else {
                    Some(x)
                }
            }
        };
        let best = if n >= PAR_THRESHOLD {
            state
                .par_iter_mut()
                .enumerate()
                .map(relax)
                .reduce(|| None, pick)
        } else {
            state.iter_mut().enumerate().map(relax).fold(None, pick)
        };
        let (w, next) = best.expect("at least one vertex outside the tree");
        edges.push(MstEdge {
            a: state[next].2,
            b: next,
            weight: w,
        });
        state[next].0 = true;
        current = next;
    }
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Internal node of the single-linkage dendrogram. Ids `< n` are points,
/// node `i` of the returned vector has id `n + i`.
#[derive(Debug, Clone, Copy)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut uf = UnionFind::new(2 * n - 1);
    let mut merges = Vec::with_capacity(n - 1);
    for e in mst {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let id = n + merges.len();
        let size = uf.size[ra] + uf.size[rb];
        merges.push(Merge {
            left: ra,
            right: rb,
            distance: e.weight,
            size,
        });
        // The new node becomes the component root, so roots are node ids.
        uf.parent[ra] = id;
        uf.parent[rb] = id;
        uf.size[id] = size;
    }
    merges
}

/// A cluster of the condensed tree.
#[derive(Debug, Clone)]
struct CondensedCluster {
    parent: Option<usize>,
    /// Distance at which the cluster split off its parent.
    birth_distance: f64,
    children: Vec<usize>,
}

/// Runs the full pipeline and labels every point.
pub fn cluster(points: &[Vec<f64>], params: &ClusteringParams) -> Result<Assignment, ReduceError> {
    params.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(ReduceError::Params("no points to cluster".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(ReduceError::Params("points differ in dimension".into()));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ReduceError::Params("non-finite coordinate".into()));
    }
    let noise = Assignment {
        labels: vec![None; n],
        n_clusters: 0,
    };
    if n < params.min_cluster_size || n < 2 {
        return Ok(noise);
    }

    let mst = mutual_reachability_mst(points, params.min_samples);
    let merges = single_linkage(n, &mst);
    let size_of = |id: usize| if id < n { 1 } else { merges[id - n].size };

    // Condense top-down. `fell_from[p]` is the condensed cluster that point p
    // dropped out of.
    let mut clusters = vec![CondensedCluster {
        parent: None,
        birth_distance: f64::INFINITY,
        children: Vec::new(),
    }];
    let mut fell_from = vec![0usize; n];
    let mut stack = vec![(2 * n - 2, 0usize)];
    let drop_points = |root: usize, into: usize, fell: &mut Vec<usize>| {
        let mut todo = vec![root];
        while let Some(id) = todo.pop() {
            if id < n {
                fell[id] = into;
            } else {
                let m = merges[id - n];
                todo.push(m.left);
                todo.push(m.right);
            }
        }
    };
    while let Some((node, c)) = stack.pop() {
        if node < n {
            fell_from[node] = c;
            continue;
        }
        let m = merges[node - n];
        let big_left = size_of(m.left) >= params.min_cluster_size;
        let big_right = size_of(m.right) >= params.min_cluster_size;
        match (big_left, big_right) {
            (true, true) => {
                for child in [m.left, m.right] {
                    let id = clusters.len();
                    clusters.push(CondensedCluster {
                        parent: Some(c),
                        birth_distance: m.distance,
                        children: Vec::new(),
                    });
                    clusters[c].children.push(id);
                    stack.push((child, id));
                }
            }
            (true, false) => {
                drop_points(m.right, c, &mut fell_from);
                stack.push((m.left, c));
            }
            (false, true) => {
                drop_points(m.left, c, &mut fell_from);
                stack.push((m.right, c));
            }
            (false, false) => {
                drop_points(m.left, c, &mut fell_from);
                drop_points(m.right, c, &mut fell_from);
            }
        }
    }

    let selected = select_leaves(&clusters, params.cluster_selection_epsilon);
    if selected.is_empty() {
        return Ok(noise);
    }

    // Nearest selected ancestor-or-self; parents precede children by construction.
    let mut owner: Vec<Option<usize>> = vec![None; clusters.len()];
    for c in 0..clusters.len() {
        owner[c] = if selected.contains(&c) {
            Some(c)
        } else {
            clusters[c].parent.and_then(|p| owner[p])
        };
    }
    let raw: Vec<Option<usize>> = fell_from.iter().map(|&c| owner[c]).collect();

    // Dense ids ordered by each cluster's smallest member index.
    let mut first_seen: Vec<usize> = Vec::new();
    for &c in raw.iter().flatten() {
        if !first_seen.contains(&c) {
            first_seen.push(c);
        }
    }
    let labels = raw
        .iter()
        .map(|l| l.map(|c| first_seen.iter().position(|&x| x == c).expect("seen")))
        .collect();
    Ok(Assignment {
        labels,
        n_clusters: first_seen.len(),
    })
}

/// Leaf clusters, each replaced by its nearest ancestor born above
/// `epsilon` when the leaf itself was born below it. The root is never
/// selected.
fn select_leaves(clusters: &[CondensedCluster], epsilon: f64) -> Vec<usize> {
    let leaves: Vec<usize> = (1..clusters.len())
        .filter(|&c| clusters[c].children.is_empty())
        .collect();
    let mut selected: Vec<usize> = Vec::new();
    for leaf in leaves {
        let chosen = if epsilon > 0.0 && clusters[leaf].birth_distance < epsilon {
            let mut cur = leaf;
            loop {
                let parent = clusters[cur].parent.expect("non-root has a parent");
                if parent == 0 {
                    break cur;
                }
                if clusters[parent].birth_distance > epsilon {
                    break parent;
                }
                cur = parent;
            }
        } else {
            leaf
        };
        if !selected.contains(&chosen) {
            selected.push(chosen);
        }
    }
    // Drop anything nested under another selection.
    let is_under = |mut c: usize, anc: usize| {
        while let Some(p) = clusters[c].parent {
            if p == anc {
                return true;
            }
            c = p;
        }
        false
    };
    selected
        .iter()
        .copied()
        .filter(|&c| !selected.iter().any(|&o| o != c && is_under(c, o)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mcs: usize, ms: usize, eps: f64) -> ClusteringParams {
        ClusteringParams {
            min_cluster_size: mcs,
            min_samples: ms,
            cluster_selection_epsilon: eps,
        }
    }

    #[test]
    fn too_few_points_is_all_noise() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.0]).collect();
        let a = cluster(&pts, &params(5, 1, 0.0)).unwrap();
        assert_eq!(a.n_clusters, 0);
        assert_eq!(a.noise_count(), 4);
    }

    #[test]
    fn single_point() {
        let a = cluster(&[vec![1.0]], &params(2, 1, 0.0)).unwrap();
        assert_eq!(a.labels, vec![None]);
    }

    #[test]
    fn core_distance_convention() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 3.0].iter().map(|&x| vec![x]).collect();
        assert_eq!(core_distances(&pts, 1), vec![0.0, 0.0, 0.0]);
        assert_eq!(core_distances(&pts, 2), vec![1.0, 1.0, 2.0]);
        assert_eq!(core_distances(&pts, 3), vec![3.0, 2.0, 3.0]);
        assert_eq!(core_distances(&pts, 10), vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn two_lines_two_clusters() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(vec![i as f64 * 0.1, 0.0]);
        }
        for i in 0..6 {
            pts.push(vec![100.0 + i as f64 * 0.1, 0.0]);
        }
        let a = cluster(&pts, &params(3, 1, 1.0)).unwrap();
        assert_eq!(a.n_clusters, 2);
        assert_eq!(a.noise_count(), 0);
        assert!(a.labels[..6].iter().all(|&l| l == Some(0)));
        assert!(a.labels[6..].iter().all(|&l| l == Some(1)));
    }

    #[test]
    fn params_validation() {
        assert!(params(1, 1, 0.0).validate().is_err());
        assert!(params(2, 0, 0.0).validate().is_err());
        assert!(params(2, 1, -1.0).validate().is_err());
        assert!(params(2, 1, f64::NAN).validate().is_err());
        assert!(ClusteringParams::default().validate().is_ok());
    }

    #[test]
    fn leaf_selection_without_epsilon_prefers_subclusters() {
        // Two tight groups of 4 inside one group that is far from another group of 8.
        let mut pts = Vec::new();
        for i in 0..4 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
        }
        for i in 0..4 {
            pts.push(vec![1.0 + i as f64 * 0.01, 0.0]);
        }
        // Growing gaps: single linkage absorbs one point at a time.
        let mut x = 50.0;
        for i in 0..8 {
            pts.push(vec![x, 0.0]);
            x += 0.01 * (1.0 + i as f64);
        }
        let leaf = cluster(&pts, &params(4, 1, 0.0)).unwrap();
        assert_eq!(leaf.n_clusters, 3);
        let merged = cluster(&pts, &params(4, 1, 2.0)).unwrap();
        assert_eq!(merged.n_clusters, 2);
        assert!(merged.labels[..8].iter().all(|&l| l == Some(0)));
    }
}
