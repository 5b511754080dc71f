//! Linear projection onto the leading principal directions, and import of
//! vectors projected elsewhere (for example by UMAP).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ReduceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProjectionMethod {
    /// Centered PCA computed in-process.
    InRepoLinear,
    /// Whitespace-separated rows read from a file, one per example.
    PrecomputedImport { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    #[serde(flatten)]
    pub method: ProjectionMethod,
    pub target_dimension: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            method: ProjectionMethod::InRepoLinear,
            target_dimension: 20,
        }
    }
}

/// Projects `vectors` according to `cfg`.
pub fn project(vectors: &[Vec<f64>], cfg: &ProjectionConfig) -> Result<Vec<Vec<f64>>, ReduceError> {
    if cfg.target_dimension < 2 {
        return Err(ReduceError::Projection(
            "target dimension must be at least 2".into(),
        ));
    }
    match &cfg.method {
        ProjectionMethod::InRepoLinear => pca(vectors, cfg.target_dimension),
        ProjectionMethod::PrecomputedImport { path } => {
            import_projection(path, vectors.len(), cfg.target_dimension)
        }
    }
}

/// Centers the data and projects it onto its top `target` principal
/// directions. Each direction's sign is fixed so that its largest-magnitude
/// coordinate is positive, which makes the output deterministic.
///
/// When the data has fewer than `target` non-degenerate directions the
/// remaining output coordinates are zero.
pub fn pca(vectors: &[Vec<f64>], target: usize) -> Result<Vec<Vec<f64>>, ReduceError> {
    let n = vectors.len();
    if n == 0 {
        return Err(ReduceError::Projection("no vectors to project".into()));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(ReduceError::Projection(
            "vectors differ in dimension".into(),
        ));
    }
    if target > dim {
        return Err(ReduceError::Projection(format!(
            "target dimension {target} exceeds input dimension {dim}"
        )));
    }

    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);

    // Directions as columns of a dim x r matrix, strongest first.
    let directions = if n >= dim {
        let cov = centered.transpose() * &centered;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        let cols: Vec<_> = order
            .iter()
            .take(target)
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    } else {
        // Fewer rows than columns: diagonalise the n x n Gram matrix instead
        // and map its eigenvectors back through the data.
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let tol = top.max(1.0) * 1e-12 * n as f64;
        let mut cols = Vec::new();
        for &k in order.iter().take(target) {
            let lambda = eig.eigenvalues[k];
            if lambda <= tol {
                break;
            }
            let v = centered.transpose() * eig.eigenvectors.column(k) / lambda.sqrt();
            cols.push(v);
        }
        if cols.is_empty() {
            DMatrix::zeros(dim, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    };

    let mut directions = directions;
    for mut col in directions.column_iter_mut() {
        let pivot = col
            .iter()
            .cloned()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, x)| {
                if x.abs() > best.1.abs() {
                    (i, x)
                } else {
                    best
                }
            });
        if pivot.1 < 0.0 {
            col.neg_mut();
        }
    }

    let projected = &centered * &directions;
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = projected.row(i).iter().cloned().collect();
            row.resize(target, 0.0);
            row
        })
        .collect())
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Reads a projection file and checks it has `rows` rows of `dim` numbers.
pub fn import_projection(
    path: &Path,
    rows: usize,
    dim: usize,
) -> Result<Vec<Vec<f64>>, ReduceError> {
    let file = std::fs::File::open(path).map_err(|source| ReduceError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ReduceError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ReduceError::Import(format!("line {}: {e}", i + 1)))?;
        if row.len() != dim {
            return Err(ReduceError::Import(format!(
                "line {}: expected {dim} values, found {}",
                i + 1,
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(ReduceError::Import(format!(
                "line {}: non-finite value",
                i + 1
            )));
        }
        out.push(row);
    }
    if out.len() != rows {
        return Err(ReduceError::Import(format!(
            "expected {rows} rows, found {}",
            out.len()
        )));
    }
    Ok(out)
}

pub fn write_projection(path: &Path, points: &[Vec<f64>]) -> Result<(), ReduceError> {
    let io_err = |source| ReduceError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for p in points {
        let line: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::seed::rng(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect()
    }

    #[test]
    fn full_rank_projection_is_isometry() {
        for (n, d) in [(12, 5), (4, 6)] {
            let pts = random_points(n, d, 3);
            let out = pca(&pts, d).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((dist(&pts[i], &pts[j]) - dist(&out[i], &out[j])).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn collinear_points_have_one_component() {
        let dir = [1.0, -2.0, 0.5, 3.0, 0.25];
        let pts: Vec<Vec<f64>> = [-1.0, 0.5, 2.0]
            .iter()
            .map(|t| dir.iter().map(|x| 1.0 + t * x).collect())
            .collect();
        let out = pca(&pts, 2).unwrap();
        for row in &out {
            assert!(row[1].abs() < 1e-9, "{row:?}");
        }
        // The first component carries all the spread.
        assert!((dist(&out[0], &out[2]) - dist(&pts[0], &pts[2])).abs() < 1e-9);
    }

    #[test]
    fn target_larger_than_input_fails() {
        let pts = random_points(5, 3, 1);
        assert!(pca(&pts, 4).is_err());
    }

    #[test]
    fn deterministic() {
        let pts = random_points(30, 8, 4);
        assert_eq!(pca(&pts, 3).unwrap(), pca(&pts, 3).unwrap());
    }

    #[test]
    fn import_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj.txt");
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.5]).collect();
        write_projection(&path, &rows).unwrap();
        assert!(matches!(
            import_projection(&path, 9, 2),
            Err(ReduceError::Import(_))
        ));
        assert!(matches!(
            import_projection(&path, 10, 3),
            Err(ReduceError::Import(_))
        ));
        assert_eq!(import_projection(&path, 10, 2).unwrap(), rows);
        let cfg = ProjectionConfig {
            method: ProjectionMethod::PrecomputedImport { path },
            target_dimension: 2,
        };
        assert!(project(&vec![vec![0.0; 5]; 9], &cfg).is_err());
    }
}
