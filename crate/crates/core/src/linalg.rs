//! Geometry and linear-algebra utilities shared by the metric modules:
//! distances, covariance, symmetric eigendecomposition, PCA and exact kNN.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::EmbeddingSet;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unbiased (n − 1) sample covariance. Requires at least two rows.
pub fn covariance(set: &EmbeddingSet) -> DMatrix<f64> {
    let n = set.len();
    let d = set.dim();
    let mean = set.mean();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in set.rows() {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    let denom = (n as f64 - 1.0).max(1.0);
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// Columns of the returned matrix are the eigenvectors.
pub fn sym_eigen_sorted(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Fitted principal-component basis.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `target_dim` unit vectors of length d (zero vectors for padding).
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Numerical rank of the fit data.
    pub rank: usize,
    /// Number of zero components added because the rank fell short.
    pub padded: usize,
}

impl Pca {
    /// Fits on the row-union of `sets`, so projections share a single basis.
    pub fn fit(sets: &[&EmbeddingSet], target_dim: usize) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::Precondition("PCA needs at least one set".into()))?;
        let d = first.dim();
        if let Some(bad) = sets.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                left: d,
                right: bad.dim(),
            });
        }
        if target_dim == 0 || target_dim > d {
            return Err(Error::Precondition(format!(
                "PCA target dimension {target_dim} must be in 1..={d}"
            )));
        }
        let n: usize = sets.iter().map(|s| s.len()).sum();
        let mut mean = vec![0.0; d];
        for s in sets {
            for r in s.rows() {
                mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = DMatrix::<f64>::zeros(d, d);
        for s in sets {
            for r in s.rows() {
                for i in 0..d {
                    let di = r[i] - mean[i];
                    for j in i..d {
                        cov[(i, j)] += di * (r[j] - mean[j]);
                    }
                }
            }
        }
        let denom = (n as f64 - 1.0).max(1.0);
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let total: f64 = cov.diagonal().iter().sum();
        let (values, vectors) = sym_eigen_sorted(cov);
        let tol = values.first().copied().unwrap_or(0.0).abs().max(total.abs()) * 1e-12;
        let rank = values.iter().filter(|&&v| v > tol).count();

        let mut components = Vec::with_capacity(target_dim);
        let mut explained_variance = Vec::with_capacity(target_dim);
        for c in 0..target_dim {
            if c >= rank {
                components.push(vec![0.0; d]);
                explained_variance.push(0.0);
                continue;
            }
            let mut v: Vec<f64> = vectors.column(c).iter().copied().collect();
            // Sign convention: largest-magnitude loading is positive.
            let mut pivot = 0;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            explained_variance.push(values[c].max(0.0));
        }
        let explained_ratio = explained_variance
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect();
        Ok(Self {
            mean,
            padded: target_dim.saturating_sub(rank),
            components,
            explained_variance,
            explained_ratio,
            rank,
        })
    }

    pub fn transform(&self, set: &EmbeddingSet) -> Result<EmbeddingSet> {
        if set.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                left: self.mean.len(),
                right: set.dim(),
            });
        }
        let k = self.components.len();
        let mut out = Vec::with_capacity(set.len() * k);
        let mut centered = vec![0.0; set.dim()];
        for r in set.rows() {
            for (c, (x, m)) in centered.iter_mut().zip(r.iter().zip(&self.mean)) {
                *c = x - m;
            }
            out.extend(self.components.iter().map(|comp| dot(comp, &centered)));
        }
        Ok(set.with_data(out, k))
    }
}

/// Projects `set` onto its own top `target_dim` principal components.
pub fn pca_reduce(set: &EmbeddingSet, target_dim: usize) -> Result<(EmbeddingSet, Pca)> {
    let pca = Pca::fit(&[set], target_dim)?;
    Ok((pca.transform(set)?, pca))
}

/// Exact k-nearest-neighbour table.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    /// Row-major `query.len() × k`, ascending per row.
    pub distances: Vec<f64>,
    pub indices: Vec<usize>,
}

impl Knn {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Distance to the k-th neighbour of every query row.
    pub fn kth(&self) -> Vec<f64> {
        self.distances
            .chunks_exact(self.k)
            .map(|r| r[self.k - 1])
            .collect()
    }
}

/// Euclidean k-nearest neighbours of every `query` row among `reference`
/// rows, ties broken by lower reference index. With `exclude_self`, query
/// row i never matches reference row i (for self-comparison).
pub fn knn_distances(
    query: &EmbeddingSet,
    reference: &EmbeddingSet,
    k: usize,
    exclude_self: bool,
) -> Result<Knn> {
    if query.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            left: query.dim(),
            right: reference.dim(),
        });
    }
    let limit = if exclude_self {
        reference.len().saturating_sub(1)
    } else {
        reference.len()
    };
    if k == 0 || k > limit {
        return Err(Error::KOutOfRange { k, limit });
    }
    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..query.len())
        .into_par_iter()
        .map(|qi| {
            let q = query.row(qi);
            let mut cand: Vec<(f64, usize)> = reference
                .rows()
                .enumerate()
                .filter(|(ri, _)| !(exclude_self && *ri == qi))
                .map(|(ri, r)| (sq_dist(q, r), ri))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| {
                a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
            };
            if cand.len() > k {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            (
                cand.iter().map(|c| c.0.sqrt()).collect(),
                cand.iter().map(|c| c.1).collect(),
            )
        })
        .collect();
    let mut distances = Vec::with_capacity(query.len() * k);
    let mut indices = Vec::with_capacity(query.len() * k);
    for (d, i) in rows {
        distances.extend(d);
        indices.extend(i);
    }
    Ok(Knn {
        k,
        distances,
        indices,
    })
}

/// Distance from every row of `set` to its k-th nearest other row.
pub fn knn_radii(set: &EmbeddingSet, k: usize) -> Result<Vec<f64>> {
    Ok(knn_distances(set, set, k, true)?.kth())
}

/// Linear-interpolation quantile (`q` in [0, 1]) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}
