//! Per-dimension histogram binning shared by Jensen–Shannon divergence and
//! embedding entropy.

use crate::linalg::{quantile_sorted, sorted};

pub const MIN_BINS: usize = 8;
pub const MAX_BINS: usize = 64;

/// Freedman–Diaconis bin count (width `2·IQR·n^(-1/3)`), clamped to
/// `[MIN_BINS, MAX_BINS]`. Zero-IQR data gets `MIN_BINS`.
pub fn freedman_diaconis_bins(values: &[f64]) -> usize {
    if values.len() < 2 {
        return MIN_BINS;
    }
    let s = sorted(values);
    let range = s[s.len() - 1] - s[0];
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let width = 2.0 * iqr * (s.len() as f64).powf(-1.0 / 3.0);
    if width <= 0.0 || range <= 0.0 {
        return MIN_BINS;
    }
    ((range / width).ceil() as usize).clamp(MIN_BINS, MAX_BINS)
}

/// Counts of `values` in `bins` equal-width bins over `[lo, hi]`; the top
/// edge falls in the last bin. Requires `hi > lo`.
pub fn counts(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut out = vec![0usize; bins];
    let scale = bins as f64 / (hi - lo);
    for &v in values {
        let idx = (((v - lo) * scale).floor().max(0.0) as usize).min(bins - 1);
        out[idx] += 1;
    }
    out
}

pub fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Shannon entropy (natural log) of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln()
        })
        .sum::<f64>()
}
