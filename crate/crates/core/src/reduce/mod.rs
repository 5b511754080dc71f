//! Reduce stage: projection, density clustering, noise removal and
//! round-robin pool construction.

pub mod hdbscan;
pub mod projection;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::corpus::Example;

pub use hdbscan::{cluster, Assignment, ClusteringParams};
pub use projection::{project, ProjectionConfig, ProjectionMethod};

#[derive(Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("projection: {0}")]
    Projection(String),
    #[error("projection import: {0}")]
    Import(String),
    #[error("clustering: {0}")]
    Params(String),
    #[error("cluster table: {0}")]
    Table(String),
}

/// Noise-free examples grouped by cluster.
///
/// `clusters[c]` lists indices into `examples` in ascending order; cluster
/// ids are dense. `source_index[i]` is the position example `i` had before
/// noise removal.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredPool {
    examples: Vec<Example>,
    source_index: Vec<usize>,
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
}

impl ClusteredPool {
    /// Builds a pool from examples and one cluster id per example. Ids are
    /// re-densified preserving their relative order.
    pub fn from_labels(examples: Vec<Example>, labels: &[usize]) -> Self {
        assert_eq!(examples.len(), labels.len(), "one label per example");
        let dense = densify(labels.iter().copied());
        let n_clusters = dense.len();
        let mut clusters = vec![Vec::new(); n_clusters];
        let assignment: Vec<usize> = labels.iter().map(|l| dense[l]).collect();
        for (i, &c) in assignment.iter().enumerate() {
            clusters[c].push(i);
        }
        let source_index = (0..examples.len()).collect();
        Self {
            examples,
            source_index,
            assignment,
            clusters,
        }
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, c: usize) -> &[usize] {
        &self.clusters[c]
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn source_index(&self, i: usize) -> usize {
        self.source_index[i]
    }

    /// The example at position `member` of cluster `c`.
    pub fn example_at(&self, c: usize, member: usize) -> &Example {
        &self.examples[self.clusters[c][member]]
    }

    /// Restricts the pool to `selected` (indices into this pool), keeping
    /// only clusters that retain members.
    pub fn subset(&self, selected: &[usize]) -> ClusteredPool {
        let mut keep: Vec<usize> = selected.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let examples = keep.iter().map(|&i| self.examples[i].clone()).collect();
        let labels: Vec<usize> = keep.iter().map(|&i| self.assignment[i]).collect();
        let mut pool = ClusteredPool::from_labels(examples, &labels);
        pool.source_index = keep.iter().map(|&i| self.source_index[i]).collect();
        pool
    }
}

fn densify(ids: impl Iterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut dense: BTreeMap<usize, usize> = ids.map(|c| (c, 0)).collect();
    for (i, v) in dense.values_mut().enumerate() {
        *v = i;
    }
    dense
}

/// Drops noise points and re-densifies cluster ids. Survivors keep their
/// relative order.
pub fn filter_noise(examples: Vec<Example>, labels: &[Option<usize>]) -> ClusteredPool {
    assert_eq!(
        examples.len(),
        labels.len(),
        "assignment must cover all examples"
    );
    let mut kept = Vec::new();
    let mut kept_labels = Vec::new();
    let mut source_index = Vec::new();
    for (i, (e, l)) in examples.into_iter().zip(labels).enumerate() {
        if let Some(c) = l {
            kept.push(e);
            kept_labels.push(*c);
            source_index.push(i);
        }
    }
    let mut pool = ClusteredPool::from_labels(kept, &kept_labels);
    pool.source_index = source_index;
    pool
}

/// A size-`k` selection from a clustered pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    pub selected: Vec<usize>,
    pub k: usize,
}

impl CandidatePool {
    pub fn materialize(&self, source: &ClusteredPool) -> ClusteredPool {
        source.subset(&self.selected)
    }

    /// Number of selections drawn from each cluster of `source`.
    pub fn contributions(&self, source: &ClusteredPool) -> Vec<usize> {
        let mut counts = vec![0; source.n_clusters()];
        for &i in &self.selected {
            counts[source.cluster_of(i)] += 1;
        }
        counts
    }
}

/// Round-robin over clusters, largest first (ties by lower id), taking each
/// cluster's next unused member per visit until `k` are chosen or the pool
/// runs out.
pub fn build_pool(pool: &ClusteredPool, k: usize) -> CandidatePool {
    let mut order: Vec<usize> = (0..pool.n_clusters()).collect();
    order.sort_by(|&a, &b| {
        pool.cluster(b)
            .len()
            .cmp(&pool.cluster(a).len())
            .then(a.cmp(&b))
    });
    let mut cursor = vec![0usize; pool.n_clusters()];
    let target = k.min(pool.len());
    let mut selected = Vec::with_capacity(target);
    while selected.len() < target {
        for &c in &order {
            if selected.len() == target {
                break;
            }
            if let Some(&i) = pool.cluster(c).get(cursor[c]) {
                selected.push(i);
                cursor[c] += 1;
            }
        }
    }
    CandidatePool { selected, k }
}

/// Writes `id<TAB>cluster` rows; noise is `-1`.
pub fn write_assignment(
    path: &Path,
    examples: &[Example],
    labels: &[Option<usize>],
) -> Result<(), ReduceError> {
    let io_err = |source| ReduceError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(w, "id\tcluster").map_err(io_err)?;
    for (e, l) in examples.iter().zip(labels) {
        let c = l.map_or(-1, |c| c as i64);
        writeln!(w, "{}\t{}", e.id, c).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads an assignment table and aligns it with `examples` by id.
pub fn read_assignment(
    path: &Path,
    examples: &[Example],
) -> Result<Vec<Option<usize>>, ReduceError> {
    let io_err = |source| ReduceError::Io {
        path: path.to_owned(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut by_id: HashMap<String, Option<usize>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if i == 0 && line.starts_with("id\t") || line.trim().is_empty() {
            continue;
        }
        let (id, c) = line
            .rsplit_once('\t')
            .ok_or_else(|| ReduceError::Table(format!("line {}: expected two columns", i + 1)))?;
        let c: i64 = c
            .trim()
            .parse()
            .map_err(|e| ReduceError::Table(format!("line {}: {e}", i + 1)))?;
        let label = match c {
            -1 => None,
            c if c >= 0 => Some(c as usize),
            _ => {
                return Err(ReduceError::Table(format!(
                    "line {}: bad cluster id {c}",
                    i + 1
                )))
            }
        };
        by_id.insert(id.to_owned(), label);
    }
    examples
        .iter()
        .map(|e| {
            by_id
                .get(&e.id)
                .copied()
                .ok_or_else(|| ReduceError::Table(format!("no cluster entry for {:?}", e.id)))
        })
        .collect()
}
