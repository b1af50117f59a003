//! Fixtures and brute-force oracles shared by the integration tests. The
//! oracles deliberately avoid the library's own helpers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use smd_scorecard::ingest::EvalConfig;
use smd_scorecard::model::{Column, ColumnKind, EmbeddingSet, RecordTable, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect()
}

pub fn set(rows: &[Vec<f64>]) -> EmbeddingSet {
    EmbeddingSet::from_rows(rows).unwrap()
}

pub fn gaussian(n: usize, d: usize, seed: u64) -> EmbeddingSet {
    set(&gaussian_rows(n, d, seed))
}

pub fn config(text: &str) -> EvalConfig {
    EvalConfig::from_toml_str(text, Path::new(".")).unwrap()
}

pub fn value(r: &smd_scorecard::model::MetricResult) -> f64 {
    r.value
        .finite()
        .unwrap_or_else(|| panic!("{} is not finite: {}", r.metric, r.value))
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from each row to its k-th nearest other row, by sorting all
/// pairwise distances.
pub fn kth_radius_oracle(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter()
        .enumerate()
        .map(|(i, a)| {
            let mut d: Vec<f64> = rows
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| euclid(a, b))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Fraction of `query` rows inside any support sphere.
pub fn membership_oracle(support: &[Vec<f64>], radii: &[f64], query: &[Vec<f64>]) -> f64 {
    let inside = query
        .iter()
        .filter(|q| support.iter().zip(radii).any(|(s, r)| euclid(q, s) <= *r))
        .count();
    inside as f64 / query.len() as f64
}

pub fn coverage_oracle(real: &[Vec<f64>], synthetic: &[Vec<f64>], k: usize) -> f64 {
    let radii = kth_radius_oracle(real, k);
    let covered = real
        .iter()
        .zip(&radii)
        .filter(|(r, rad)| synthetic.iter().any(|s| euclid(r, s) <= **rad))
        .count();
    covered as f64 / real.len() as f64
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Minimum mean matching cost over all permutations.
pub fn brute_force_emd(real: &[Vec<f64>], synthetic: &[Vec<f64>]) -> f64 {
    let n = real.len();
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| euclid(&real[i], &synthetic[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / n as f64
}

/// F and the between/within sums of squares, by the textbook formulas.
pub fn anova_oracle(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let sst: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    let ssb = sst - ssw;
    let df1 = (groups.len() - 1) as f64;
    let df2 = (all.len() - groups.len()) as f64;
    ((ssb / df1) / (ssw / df2), df1, df2)
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Upper tail of the F(d1, d2) distribution by Simpson integration of the
/// density over [0, f] (with x = u² to smooth the origin).
pub fn f_tail_by_integration(f: f64, d1: f64, d2: f64) -> f64 {
    let ln_norm = ln_gamma((d1 + d2) / 2.0) - ln_gamma(d1 / 2.0) - ln_gamma(d2 / 2.0) + (d1 / 2.0) * (d1 / d2).ln();
    let pdf = |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (ln_norm + (d1 / 2.0 - 1.0) * x.ln() - ((d1 + d2) / 2.0) * (1.0 + d1 * x / d2).ln()).exp()
    };
    let g = |u: f64| if u == 0.0 && d1 < 2.0 { 2.0 * (ln_norm).exp() } else { pdf(u * u) * 2.0 * u };
    let upper = f.sqrt();
    let n = 200_000;
    let h = upper / n as f64;
    let mut s = g(0.0) + g(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(i as f64 * h);
    }
    1.0 - s * h / 3.0
}

/// Random categorical table: `qi` quasi-identifier columns with `levels`
/// values each and a sensitive column with `sens_levels` values.
pub fn random_privacy_table(rows: usize, qi: usize, levels: usize, sens_levels: usize, seed: u64) -> RecordTable {
    let mut r = rng(seed);
    let mut columns: Vec<Column> = (0..qi).map(|i| Column::new(format!("q{i}"), ColumnKind::Categorical)).collect();
    columns.push(Column::new("s", ColumnKind::Categorical));
    let data = (0..rows)
        .map(|_| {
            let mut row: Vec<Option<Value>> = (0..qi)
                .map(|_| Some(Value::Label(format!("v{}", r.random_range(0..levels)))))
                .collect();
            row.push(Some(Value::Label(format!("s{}", r.random_range(0..sens_levels)))));
            row
        })
        .collect();
    RecordTable::new(columns, data).unwrap()
}

fn label(t: &RecordTable, row: usize, col: usize) -> String {
    match t.cell(row, col) {
        Some(Value::Label(s)) => s.clone(),
        Some(Value::Number(v)) => v.to_string(),
        None => "<missing>".into(),
    }
}

/// Rows with the same QI tuple as row i, found by comparing every pair.
fn class_of(t: &RecordTable, qi: &[usize], i: usize) -> Vec<usize> {
    (0..t.n_rows())
        .filter(|&j| qi.iter().all(|&c| label(t, i, c) == label(t, j, c)))
        .collect()
}

pub fn k_anonymity_oracle(t: &RecordTable, qi: &[usize]) -> usize {
    (0..t.n_rows()).map(|i| class_of(t, qi, i).len()).min().unwrap()
}

pub fn l_diversity_oracle(t: &RecordTable, qi: &[usize], s: usize) -> usize {
    (0..t.n_rows())
        .map(|i| class_of(t, qi, i).iter().map(|&j| label(t, j, s)).collect::<BTreeSet<_>>().len())
        .min()
        .unwrap()
}

fn dist_of(t: &RecordTable, rows: &[usize], s: usize) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for &j in rows {
        *m.entry(label(t, j, s)).or_insert(0.0) += 1.0 / rows.len() as f64;
    }
    m
}

pub fn t_closeness_oracle(t: &RecordTable, qi: &[usize], s: usize) -> f64 {
    let all: Vec<usize> = (0..t.n_rows()).collect();
    let global = dist_of(t, &all, s);
    (0..t.n_rows())
        .map(|i| {
            let local = dist_of(t, &class_of(t, qi, i), s);
            let keys: BTreeSet<&String> = global.keys().chain(local.keys()).collect();
            0.5 * keys
                .iter()
                .map(|k| (global.get(*k).unwrap_or(&0.0) - local.get(*k).unwrap_or(&0.0)).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub const FULL_MANIFEST: &str = r#"
[general]
name = "Synthetic Chest CT v2"
release_date = "2026-01-15"
version_history = "v1 initial; v2 adds contrast phases"
dataset_size = "10,000 volumes from 2,000 synthetic patients"
dataset_modality = "CT"
dataset_provenance = "Latent diffusion model trained on a multi-site cohort"
dataset_intended_use = "Augmenting nodule detection training"
dataset_labels = "Nodule segmentation masks"
attribution_and_licensing = "CC BY 4.0"
point_of_contact = "data-team@example.org"

[task_evaluation]
task_performance = "Detector trained on synthetic plus real matches the real-only baseline"
metrics = [{ name = "sensitivity", value = "0.91", acceptance_threshold = ">= 0.85" }]

[human_evaluation]
human_study_design = "Three radiologists, 200 cases"
reader_study_results = "Realism rated 4.1 of 5"
observations_and_failure_cases = "Occasional rib discontinuities"

[considerations]
privacy_and_anonymization = "No real patient pixels retained"
biases = "Under-represents pediatric anatomy"
limitations = "Soft-tissue contrast is smoothed"
recommendations = "Mix with real data"

[usage]
repository_access = "https://example.org/dataset"
preprocessing_requirements = "Resample to 1 mm isotropic"
user_documentation = "README in repository"
intended_audience = "Imaging researchers"

[generation]
generation_method = "Latent diffusion, 1000 steps"
training_and_validation_process = "5-fold split by site"
[generation.generation_parameters]
architecture = "UNet"
epochs = "300"

[reference_dataset]
purpose = "Lung nodule screening"
origin_and_source = "Three hospitals, 2015-2020"
dataset_size = "2,400 scans"
clinical_population = "Adults 50-80"
acquisition_devices = "Multi-vendor 64-slice CT"
reference_standard = "Consensus of two radiologists"
ground_truth_labels = "Nodule masks"
metadata = "Age, sex, smoking status"
preprocessing = "HU windowing"
known_limitations = "Single country"
"#;

/// Satisfies exactly four rubric items: generation method, training
/// process, version history and license.
pub const FOUR_ITEM_MANIFEST: &str = r#"
[general]
name = "Four"
version_history = "v1"
attribution_and_licensing = "MIT"

[generation]
generation_method = "GAN"
training_and_validation_process = "hold-out split"
"#;

pub fn golden_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}
