//! Congruence: alignment of the synthetic distribution with the real one in
//! embedding and image space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram;
use crate::ingest::GrayImage;
use crate::linalg::{covariance, dist, dot, knn_radii, norm, sorted, sq_dist, sym_eigen_sorted};
use crate::model::{EmbeddingSet, Metric, MetricResult, MetricValue};

/// Ridge added to each covariance before the Fréchet matrix square root.
pub const FRECHET_RIDGE: f64 = 1e-6;
/// Probability mass added to every histogram bin before JSD.
pub const JSD_SMOOTHING: f64 = 1e-12;
/// Largest sample count accepted by exact-matching EMD.
pub const EXACT_EMD_MAX_N: usize = 512;

pub(crate) fn check_dims(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Cosine of the angle between the two dataset means.
pub fn cosine_centroid(real: &EmbeddingSet, synthetic: &EmbeddingSet) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    let (a, b) = (real.mean(), synthetic.mean());
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 || nb == 0.0 {
        return Ok(MetricResult::undefined(Metric::CosineSimilarity, "zero centroid")
            .with_diag("real_centroid_norm", na)
            .with_diag("synthetic_centroid_norm", nb));
    }
    let c = (dot(&a, &b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(MetricResult::new(Metric::CosineSimilarity, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmdMode {
    /// Mean over dimensions of the 1-D W1 distance.
    #[default]
    PerDimension,
    /// Optimal one-to-one assignment under Euclidean ground distance.
    ExactMatching,
}

/// Exact 1-D Wasserstein-1 distance between two empirical distributions:
/// the integral of |F_a − F_b| over the merged support.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        total += (fa - fb).abs() * (next - prev);
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
        prev = next;
    }
    total
}

/// Earth mover's (W1) distance between the two sets.
pub fn wasserstein1(
    real: &EmbeddingSet,
    synthetic: &EmbeddingSet,
    mode: EmdMode,
) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    match mode {
        EmdMode::PerDimension => {
            let d = real.dim();
            let per_dim: Vec<f64> = (0..d)
                .map(|j| wasserstein1_1d(&real.column(j), &synthetic.column(j)))
                .collect();
            let mean = per_dim.iter().sum::<f64>() / d as f64;
            let mut r = MetricResult::new(Metric::EarthMoversDistance, mean);
            if d <= 16 {
                for (j, v) in per_dim.iter().enumerate() {
                    r = r.with_diag(&format!("dim{j}"), *v);
                }
            }
            Ok(r.with_note("mode: per-dimension"))
        }
        EmdMode::ExactMatching => {
            if real.len() != synthetic.len() {
                return Err(Error::Precondition(format!(
                    "exact-matching EMD needs equal sample counts ({} vs {}); use the per-dimension mode",
                    real.len(),
                    synthetic.len()
                )));
            }
            if real.len() > EXACT_EMD_MAX_N {
                return Err(Error::Precondition(format!(
                    "exact-matching EMD supports at most {EXACT_EMD_MAX_N} samples, got {}; use the per-dimension mode",
                    real.len()
                )));
            }
            let n = real.len();
            let cost: Vec<f64> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| dist(real.row(i), synthetic.row(j)))
                .collect();
            let assignment = min_cost_assignment(&cost, n);
            let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            Ok(MetricResult::new(Metric::EarthMoversDistance, total / n as f64)
                .with_note("mode: exact-matching"))
        }
    }
}

/// Hungarian algorithm on a dense n×n cost matrix (row-major). Returns the
/// column assigned to each row.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based potentials formulation.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Jensen–Shannon divergence (base 2) between two probability vectors.
pub fn jsd_probabilities(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).log2())
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl(p, &m) + 0.5 * kl(q, &m)).clamp(0.0, 1.0)
}

fn smoothed(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let raw: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / total as f64 + JSD_SMOOTHING)
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / z).collect()
}

/// Mean over dimensions of the histogram JSD on the pooled range.
pub fn jensen_shannon(
    real: &EmbeddingSet,
    synthetic: &EmbeddingSet,
    bins: Option<usize>,
) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    if bins == Some(0) {
        return Err(Error::Config("JSD bin count must be positive".into()));
    }
    let d = real.dim();
    let mut total = 0.0;
    let mut constant = 0usize;
    let mut bins_used = 0usize;
    for j in 0..d {
        let a = real.column(j);
        let b = synthetic.column(j);
        let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        let (lo, hi) = histogram::range(&pooled);
        if hi <= lo {
            constant += 1;
            continue;
        }
        let k = bins.unwrap_or_else(|| histogram::freedman_diaconis_bins(&pooled));
        bins_used = bins_used.max(k);
        let p = smoothed(&histogram::counts(&a, lo, hi, k));
        let q = smoothed(&histogram::counts(&b, lo, hi, k));
        total += jsd_probabilities(&p, &q);
    }
    let mut r = MetricResult::new(Metric::JensenShannonDivergence, total / d as f64)
        .with_diag("max_bins", bins_used as f64);
    if constant > 0 {
        r = r.with_diag("constant_dimensions", constant as f64);
    }
    Ok(r)
}

/// ‖μ_r − μ_s‖² + Tr(Σ_r + Σ_s − 2(Σ_r Σ_s)^{1/2}) over the embeddings.
pub fn frechet_distance(real: &EmbeddingSet, synthetic: &EmbeddingSet) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    if real.len() < 2 || synthetic.len() < 2 {
        return Ok(MetricResult::undefined(
            Metric::FrechetDistance,
            "insufficient samples",
        ));
    }
    let d = real.dim();
    let mean_term = sq_dist(&real.mean(), &synthetic.mean());
    let ridge = DMatrix::<f64>::identity(d, d) * FRECHET_RIDGE;
    let cov_r = covariance(real) + &ridge;
    let cov_s = covariance(synthetic) + &ridge;

    // Tr sqrt(Σr Σs) = Tr sqrt(Σr^½ Σs Σr^½); the inner product is symmetric.
    let sqrt_r = sym_sqrt(cov_r.clone());
    let mut inner = &sqrt_r * &cov_s * &sqrt_r;
    inner = (&inner + inner.transpose()) * 0.5;
    let (vals, _) = sym_eigen_sorted(inner);
    let tr_sqrt: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    let trace_term = cov_r.trace() + cov_s.trace() - 2.0 * tr_sqrt;
    let trace_term = if trace_term < 0.0 && trace_term > -1e-8 {
        0.0
    } else {
        trace_term
    };
    let fd = mean_term + trace_term;
    Ok(MetricResult::new(Metric::FrechetDistance, fd.max(0.0))
        .with_diag("mean_term", mean_term)
        .with_diag("trace_term", trace_term)
        .with_diag("regularization", FRECHET_RIDGE))
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let (vals, vecs) = sym_eigen_sorted(m);
    let mut scaled = vecs.clone();
    for (c, v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    scaled * vecs.transpose()
}

/// Fraction of `query` points inside at least one kNN hypersphere of
/// `support` (radius = distance to the k-th nearest other support point).
pub(crate) fn manifold_membership(
    support: &EmbeddingSet,
    radii: &[f64],
    query: &EmbeddingSet,
) -> Vec<bool> {
    query
        .rows()
        .map(|q| {
            support
                .rows()
                .zip(radii)
                .any(|(s, r)| sq_dist(q, s) <= r * r)
        })
        .collect()
}

pub(crate) fn insufficient(metric: Metric, n: usize, k: usize) -> MetricResult {
    MetricResult::undefined(metric, "insufficient samples")
        .with_diag("n", n as f64)
        .with_diag("k", k as f64)
}

/// Fraction of synthetic points inside the real kNN manifold.
pub fn manifold_precision(
    real: &EmbeddingSet,
    synthetic: &EmbeddingSet,
    k: usize,
) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    if k == 0 || real.len() <= k {
        return Ok(insufficient(Metric::Precision, real.len(), k));
    }
    let radii = knn_radii(real, k)?;
    let inside = manifold_membership(real, &radii, synthetic);
    let frac = inside.iter().filter(|b| **b).count() as f64 / synthetic.len() as f64;
    Ok(MetricResult::new(Metric::Precision, frac).with_diag("k", k as f64))
}

/// Euclidean distance between the two dataset centroids.
pub fn distance_to_centroid(real: &EmbeddingSet, synthetic: &EmbeddingSet) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    Ok(MetricResult::new(
        Metric::CentroidDistance,
        dist(&real.mean(), &synthetic.mean()),
    ))
}

/// Paired real/synthetic images.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub label: String,
    pub real: GrayImage,
    pub synthetic: GrayImage,
}

fn pair_dims_ok(p: &ImagePair) -> bool {
    p.real.width == p.synthetic.width
        && p.real.height == p.synthetic.height
        && p.real.max_value == p.synthetic.max_value
}

fn peak(img: &GrayImage) -> f64 {
    if img.max_value > 255 {
        65535.0
    } else {
        255.0
    }
}

/// PSNR of one pair in dB; `+inf` for identical images.
pub fn psnr_pair(a: &GrayImage, b: &GrayImage) -> f64 {
    let mse = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum::<f64>()
        / a.pixels.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let p = peak(a);
    10.0 * (p * p / mse).log10()
}

/// Mean PSNR over pairs. Pairs whose dimensions differ are skipped and
/// counted. Identical pairs contribute `+inf`; the mean is `+inf` only when
/// every usable pair is identical, otherwise it averages the finite pairs.
pub fn psnr(pairs: &[ImagePair]) -> MetricResult {
    let mut finite = Vec::new();
    let mut identical = 0usize;
    let mut skipped = Vec::new();
    for p in pairs {
        if !pair_dims_ok(p) {
            skipped.push(p.label.clone());
            continue;
        }
        let v = psnr_pair(&p.real, &p.synthetic);
        if v.is_infinite() {
            identical += 1;
        } else {
            finite.push(v);
        }
    }
    let value = if finite.is_empty() && identical == 0 {
        MetricValue::undefined("no usable image pairs")
    } else if finite.is_empty() {
        MetricValue::PosInfinity
    } else {
        MetricValue::Finite(finite.iter().sum::<f64>() / finite.len() as f64)
    };
    let mut r = MetricResult::new(Metric::PeakSignalToNoiseRatio, value)
        .with_diag("pairs", pairs.len() as f64)
        .with_diag("identical_pairs", identical as f64)
        .with_diag("skipped_pairs", skipped.len() as f64);
    if identical > 0 && !finite.is_empty() {
        r = r.with_note("identical pairs excluded from the mean");
    } else if identical > 0 {
        r = r.with_note("identical");
    }
    for s in skipped {
        r = r.with_note(format!("pair {s} skipped: dimension mismatch"));
    }
    r
}

pub const SSIM_WINDOW: usize = 8;

/// Mean SSIM over all 8×8 windows (stride 1, uniform weights, population
/// moments), stabilizers C1 = (0.01·peak)², C2 = (0.03·peak)².
pub fn ssim_pair(a: &GrayImage, b: &GrayImage) -> Option<f64> {
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return None;
    }
    let p = peak(a);
    let c1 = (0.01 * p) * (0.01 * p);
    let c2 = (0.03 * p) * (0.03 * p);
    // Summed-area tables of x, y, x², y², xy; all entries are integers so the
    // sums are exact for ordinary image sizes.
    let stride = w + 1;
    let mut sat = vec![[0.0f64; 5]; (w + 1) * (h + 1)];
    for yy in 0..h {
        let mut row = [0.0f64; 5];
        for xx in 0..w {
            let x = f64::from(a.pixels[yy * w + xx]);
            let y = f64::from(b.pixels[yy * w + xx]);
            let vals = [x, y, x * x, y * y, x * y];
            for k in 0..5 {
                row[k] += vals[k];
                sat[(yy + 1) * stride + xx + 1][k] = sat[yy * stride + xx + 1][k] + row[k];
            }
        }
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let (y1, x1) = (y0 + SSIM_WINDOW, x0 + SSIM_WINDOW);
            let mut s = [0.0f64; 5];
            for (k, sk) in s.iter_mut().enumerate() {
                *sk = sat[y1 * stride + x1][k] - sat[y0 * stride + x1][k] - sat[y1 * stride + x0][k]
                    + sat[y0 * stride + x0][k];
            }
            let mx = s[0] / n;
            let my = s[1] / n;
            let vx = s[2] / n - mx * mx;
            let vy = s[3] / n - my * my;
            let cxy = s[4] / n - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Some(total / count as f64)
}

/// Mean SSIM over pairs; mismatched or too-small pairs are skipped and
/// flagged.
pub fn ssim(pairs: &[ImagePair]) -> MetricResult {
    let mut vals = Vec::new();
    let mut notes = Vec::new();
    for p in pairs {
        if !pair_dims_ok(p) {
            notes.push(format!("pair {} skipped: dimension mismatch", p.label));
            continue;
        }
        match ssim_pair(&p.real, &p.synthetic) {
            Some(v) => vals.push(v),
            None => notes.push(format!("pair {} skipped: smaller than the 8x8 window", p.label)),
        }
    }
    let value = if vals.is_empty() {
        MetricValue::undefined("no usable image pairs")
    } else {
        MetricValue::Finite(vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let mut r = MetricResult::new(Metric::StructuralSimilarityIndex, value)
        .with_diag("pairs", pairs.len() as f64)
        .with_diag("skipped_pairs", notes.len() as f64);
    r.notes = notes;
    r
}
