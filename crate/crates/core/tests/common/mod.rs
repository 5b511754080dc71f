#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use grasp::corpus::{save_examples, EntityMap};
use grasp::reduce::projection::write_projection;
use grasp::reduce::ClusteredPool;
use grasp::{Example, Provenance};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const LABELS: [&str; 3] = ["Revenue", "NetIncome", "Assets"];

pub fn example(i: usize, topic: usize) -> Example {
    let mut entities = EntityMap::new();
    if !i.is_multiple_of(3) {
        let label = LABELS[topic % LABELS.len()];
        entities.insert(
            label.to_string(),
            BTreeSet::from([format!("{},{:03}", i / 1000 + 1, i % 1000)]),
        );
    }
    Example::new(
        format!("ex{i:05}"),
        format!(
            "Sentence {i} in topic {topic} reports {} of {},{:03}.",
            LABELS[topic % 3],
            i / 1000 + 1,
            i % 1000
        ),
        entities,
        Provenance::Synthetic,
    )
    .unwrap()
}

/// `n_blobs * per_blob` points in `dim` dimensions: tight Gaussian blobs
/// around well separated centres. Returns the points and each point's blob.
pub fn blobs(
    n_blobs: usize,
    per_blob: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = grasp::seed::rng(seed);
    let centres: Vec<Vec<f64>> = (0..n_blobs)
        .map(|_| (0..dim).map(|_| rng.random_range(-100.0..100.0)).collect())
        .collect();
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut points = Vec::new();
    let mut blob = Vec::new();
    // Interleave blobs so no blob occupies a contiguous id range.
    for _ in 0..per_blob {
        for (b, c) in centres.iter().enumerate() {
            points.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
            blob.push(b);
        }
    }
    (points, blob)
}

/// Writes `pool.jsonl` and an aligned 20-dimensional `projection.txt` with
/// `n_blobs * per_blob` records, plus a config using surrogate fitness.
pub fn write_fixture(
    dir: &Path,
    n_blobs: usize,
    per_blob: usize,
    pool_sizes: &[usize],
    extra: &str,
) {
    let (points, blob) = blobs(n_blobs, per_blob, 20, 0.3, 7);
    let examples: Vec<Example> = blob
        .iter()
        .enumerate()
        .map(|(i, &b)| example(i, b))
        .collect();
    save_examples(&dir.join("pool.jsonl"), &examples).unwrap();
    write_projection(&dir.join("projection.txt"), &points).unwrap();
    let sizes: Vec<String> = pool_sizes.iter().map(|k| k.to_string()).collect();
    let config = format!(
        r#"seed = 42
output_dir = "out"
fitness = "surrogate"
pool_sizes = [{}]
n_validation = {}

[data]
examples = "pool.jsonl"

[projection]
method = "precomputed-import"
path = "projection.txt"
target_dimension = 20

[clustering]
min_cluster_size = 9
min_samples = 1
cluster_selection_epsilon = 5.0
{extra}"#,
        sizes.join(", "),
        (examples.len() / 20).max(1),
    );
    std::fs::write(dir.join("grasp.toml"), config).unwrap();
}

/// A pool with the given cluster sizes; example ids are `x{i}`.
pub fn pool_with_sizes(sizes: &[usize]) -> ClusteredPool {
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    let examples = (0..labels.len())
        .map(|i| {
            Example::new(
                format!("x{i}"),
                format!("text {i}"),
                EntityMap::new(),
                Provenance::Human,
            )
            .unwrap()
        })
        .collect();
    ClusteredPool::from_labels(examples, &labels)
}

pub fn entity_map(pairs: &[(&str, &[&str])]) -> EntityMap {
    pairs
        .iter()
        .map(|(l, vs)| (l.to_string(), vs.iter().map(|v| v.to_string()).collect()))
        .collect::<BTreeMap<_, _>>()
}
