//! Coverage: diversity and breadth of the synthetic set.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::congruence::{check_dims, insufficient, manifold_membership};
use crate::error::{Error, Result};
use crate::histogram;
use crate::hull::{hull_area, hull_volume};
use crate::linalg::{covariance, dist, dot, knn_radii, norm, pca_reduce, sq_dist, sym_eigen_sorted};
use crate::model::{EmbeddingSet, Metric, MetricResult};

pub const DEFAULT_DPP_RIDGE: f64 = 1e-9;
/// Eigenvalues of K/n below this are dropped from the Vendi entropy.
pub const VENDI_EIGEN_FLOOR: f64 = 1e-12;
pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;
pub const STOCHASTIC_TOL: f64 = 1e-6;

fn fraction(flags: &[bool]) -> f64 {
    flags.iter().filter(|b| **b).count() as f64 / flags.len() as f64
}

/// Fraction of real points inside the synthetic kNN manifold.
pub fn manifold_recall(real: &EmbeddingSet, synthetic: &EmbeddingSet, k: usize) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    if k == 0 || synthetic.len() <= k {
        return Ok(insufficient(Metric::Recall, synthetic.len(), k));
    }
    let radii = knn_radii(synthetic, k)?;
    let inside = manifold_membership(synthetic, &radii, real);
    Ok(MetricResult::new(Metric::Recall, fraction(&inside)).with_diag("k", k as f64))
}

/// Fraction of real points whose real-kNN sphere holds at least one
/// synthetic point.
pub fn manifold_coverage(real: &EmbeddingSet, synthetic: &EmbeddingSet, k: usize) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    if k == 0 || real.len() <= k {
        return Ok(insufficient(Metric::Coverage, real.len(), k));
    }
    let radii = knn_radii(real, k)?;
    let covered: Vec<bool> = real
        .rows()
        .zip(&radii)
        .map(|(r, rad)| synthetic.rows().any(|s| sq_dist(r, s) <= rad * rad))
        .collect();
    Ok(MetricResult::new(Metric::Coverage, fraction(&covered)).with_diag("k", k as f64))
}

/// Hull volume after PCA to `reduce_to` (2 or 3) dimensions when the data
/// has more; 1-D data yields its range.
pub fn convex_hull_volume(synthetic: &EmbeddingSet, reduce_to: usize) -> Result<MetricResult> {
    if !(2..=3).contains(&reduce_to) {
        return Err(Error::Precondition(format!("reduce_to must be 2 or 3, got {reduce_to}")));
    }
    let mut result = MetricResult::new(Metric::ConvexHullVolume, 0.0);
    let set = if synthetic.dim() > reduce_to {
        let (reduced, pca) = pca_reduce(synthetic, reduce_to)?;
        result = result
            .with_diag("pca_explained_ratio", pca.explained_ratio.iter().sum())
            .with_diag("pca_padded_components", pca.padded as f64);
        reduced
    } else {
        synthetic.clone()
    };
    let measure = match set.dim() {
        1 => {
            let (lo, hi) = histogram::range(set.data());
            let len = hi - lo;
            crate::hull::HullMeasure {
                volume: len,
                degenerate: len <= 0.0,
                facets: 2,
            }
        }
        2 => hull_area(&set.rows().map(|r| [r[0], r[1]]).collect::<Vec<_>>()),
        _ => hull_volume(&set.rows().map(|r| [r[0], r[1], r[2]]).collect::<Vec<_>>()),
    };
    result.value = measure.volume.into();
    result = result
        .with_diag("dimension", set.dim() as f64)
        .with_diag("degenerate", if measure.degenerate { 1.0 } else { 0.0 });
    if measure.degenerate {
        result = result.with_note("degenerate: points are affinely dependent");
    }
    Ok(result)
}

/// Similarity kernel for Vendi and DPP scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Cosine,
    /// `exp(-gamma·‖x − y‖²)`; gamma defaults to 1/d.
    Rbf,
}

/// Unit-diagonal PSD similarity matrix and the number of all-zero rows
/// (which get similarity 0 to every other row under the cosine kernel).
pub fn kernel_matrix(set: &EmbeddingSet, kernel: Kernel, gamma: Option<f64>) -> (DMatrix<f64>, usize) {
    let n = set.len();
    let mut k = DMatrix::<f64>::identity(n, n);
    let mut zero_rows = 0;
    match kernel {
        Kernel::Cosine => {
            let norms: Vec<f64> = set.rows().map(norm).collect();
            zero_rows = norms.iter().filter(|&&x| x == 0.0).count();
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = if norms[i] == 0.0 || norms[j] == 0.0 {
                        0.0
                    } else {
                        (dot(set.row(i), set.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                    };
                    k[(i, j)] = s;
                    k[(j, i)] = s;
                }
            }
        }
        Kernel::Rbf => {
            let g = gamma.unwrap_or(1.0 / set.dim() as f64);
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = (-g * sq_dist(set.row(i), set.row(j))).exp();
                    k[(i, j)] = s;
                    k[(j, i)] = s;
                }
            }
        }
    }
    (k, zero_rows)
}

/// exp of the Shannon entropy of the eigenvalues of K/n.
pub fn vendi_score(synthetic: &EmbeddingSet, kernel: Kernel, gamma: Option<f64>) -> MetricResult {
    let n = synthetic.len();
    let (k, zero_rows) = kernel_matrix(synthetic, kernel, gamma);
    let (values, _) = sym_eigen_sorted(k / n as f64);
    let h: f64 = -values
        .iter()
        .filter(|&&l| l > VENDI_EIGEN_FLOOR)
        .map(|&l| l * l.ln())
        .sum::<f64>();
    let mut r = MetricResult::new(Metric::VendiScore, h.exp()).with_diag("n", n as f64);
    if zero_rows > 0 {
        r = r
            .with_diag("zero_rows", zero_rows as f64)
            .with_note("zero rows have similarity 0 to every other row");
    }
    r
}

/// log det(K + ridge·I).
pub fn dpp_logdet(synthetic: &EmbeddingSet, kernel: Kernel, gamma: Option<f64>, ridge: f64) -> MetricResult {
    let n = synthetic.len();
    let (k, _) = kernel_matrix(synthetic, kernel, gamma);
    let m = k + DMatrix::<f64>::identity(n, n) * ridge;
    let logdet = match m.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => {
            let (values, _) = sym_eigen_sorted(m);
            values.iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).sum()
        }
    };
    MetricResult::new(Metric::DppScore, logdet).with_diag("ridge", ridge)
}

/// Trace of the unbiased sample covariance.
pub fn total_variance(synthetic: &EmbeddingSet) -> MetricResult {
    if synthetic.len() < 2 {
        return insufficient(Metric::Variance, synthetic.len(), 1);
    }
    MetricResult::new(Metric::Variance, covariance(synthetic).trace())
}

/// Mean over dimensions of the histogram entropy (natural log).
pub fn embedding_entropy(synthetic: &EmbeddingSet, bins: Option<usize>) -> MetricResult {
    let d = synthetic.dim();
    let mut constant = 0usize;
    let mut total = 0.0;
    for j in 0..d {
        let col = synthetic.column(j);
        let (lo, hi) = histogram::range(&col);
        if hi <= lo {
            constant += 1;
            continue;
        }
        let b = bins.unwrap_or_else(|| histogram::freedman_diaconis_bins(&col));
        total += histogram::entropy(&histogram::counts(&col, lo, hi, b));
    }
    let mut r = MetricResult::new(Metric::Entropy, total / d as f64);
    if constant > 0 {
        r = r.with_diag("constant_dimensions", constant as f64);
    }
    r
}

/// Mean, over synthetic points inside the real kNN manifold, of the radius of
/// the smallest real sphere containing the point.
pub fn rarity_score(real: &EmbeddingSet, synthetic: &EmbeddingSet, k: usize) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    if k == 0 || real.len() <= k {
        return Ok(insufficient(Metric::RarityScore, real.len(), k));
    }
    let radii = knn_radii(real, k)?;
    let smallest: Vec<Option<f64>> = synthetic
        .rows()
        .map(|s| {
            real.rows()
                .zip(&radii)
                .filter(|(r, rad)| sq_dist(s, r) <= *rad * *rad)
                .map(|(_, rad)| *rad)
                .min_by(f64::total_cmp)
        })
        .collect();
    let inside: Vec<f64> = smallest.iter().flatten().copied().collect();
    let out_frac = 1.0 - inside.len() as f64 / synthetic.len() as f64;
    if inside.is_empty() {
        return Ok(MetricResult::undefined(Metric::RarityScore, "no synthetic point inside the real manifold")
            .with_diag("out_of_manifold_fraction", out_frac));
    }
    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
    Ok(MetricResult::new(Metric::RarityScore, mean)
        .with_diag("k", k as f64)
        .with_diag("out_of_manifold_fraction", out_frac))
}

pub fn default_k_clusters(n: usize) -> usize {
    (n / 5).clamp(2, 10)
}

/// Seeded k-means: D²-weighted seeding, then Lloyd iterations until the
/// relative inertia change drops below [`KMEANS_TOL`]. Returns labels.
pub fn kmeans(set: &EmbeddingSet, k: usize, seed: u64) -> Vec<usize> {
    let n = set.len();
    let d = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![set.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = set.rows().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(set.row(next).to_vec());
        for (i, r) in set.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centers.last().expect("pushed")));
        }
    }

    let mut labels = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITER {
        let mut inertia = 0.0;
        for (i, r) in set.rows().enumerate() {
            let (best, bd) = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(r, ctr)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            labels[i] = best;
            inertia += bd;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in set.rows().enumerate() {
            counts[labels[i]] += 1;
            sums[labels[i]].iter_mut().zip(r).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let change = (prev_inertia - inertia).abs();
        if change <= KMEANS_TOL * inertia.max(f64::MIN_POSITIVE) || inertia == 0.0 {
            break;
        }
        prev_inertia = inertia;
    }
    labels
}

/// Occupancy entropy of k-means cluster sizes divided by ln(k).
pub fn cluster_balance(synthetic: &EmbeddingSet, k_clusters: Option<usize>, seed: u64) -> MetricResult {
    let n = synthetic.len();
    let k = k_clusters.unwrap_or_else(|| default_k_clusters(n));
    if n < 4 || n < k {
        return insufficient(Metric::ClusteringBalance, n, k);
    }
    let labels = kmeans(synthetic, k, seed);
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let score = histogram::entropy(&counts) / (k as f64).ln();
    MetricResult::new(Metric::ClusteringBalance, score.clamp(0.0, 1.0))
        .with_diag("k_clusters", k as f64)
        .with_diag("empty_clusters", counts.iter().filter(|&&c| c == 0).count() as f64)
}

/// exp(mean KL(p(y|x) ‖ p(y))) over rows of a class-probability matrix.
pub fn inception_style_score(class_probs: &EmbeddingSet) -> Result<MetricResult> {
    let c = class_probs.dim();
    for (i, row) in class_probs.rows().enumerate() {
        let s: f64 = row.iter().sum();
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidData(format!(
                "class-probability row {} (id `{}`) is not a probability vector (sum {s})",
                i + 1,
                class_probs.ids()[i]
            )));
        }
    }
    let marginal = class_probs.mean();
    let kl_mean = class_probs
        .rows()
        .map(|row| {
            row.iter()
                .zip(&marginal)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, m)| p * (p / m).ln())
                .sum::<f64>()
        })
        .sum::<f64>()
        / class_probs.len() as f64;
    Ok(MetricResult::new(Metric::InceptionScore, kl_mean.exp()).with_diag("classes", c as f64))
}

/// Mean distance from each synthetic point to the real centroid.
pub fn distance_to_centroid_coverage(real: &EmbeddingSet, synthetic: &EmbeddingSet) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    let c = real.mean();
    let mean = synthetic.rows().map(|s| dist(s, &c)).sum::<f64>() / synthetic.len() as f64;
    Ok(MetricResult::new(Metric::CentroidSpread, mean))
}
