//! Library values checked against independent brute-force or closed-form
//! computations.

mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;

use smd_scorecard::compliance::{k_anonymity, l_diversity, leakage_rate, t_closeness};
use smd_scorecard::completeness::required_field_proportion;
use smd_scorecard::congruence::{frechet_distance, jsd_probabilities, manifold_precision, ssim_pair, wasserstein1, EmdMode};
use smd_scorecard::consistency::{dispersion, one_way_anova};
use smd_scorecard::constraint::{derive_range_rules, evaluate_rules, ConstraintRuleSet, RuleSpec};
use smd_scorecard::coverage::{
    dpp_logdet, embedding_entropy, inception_style_score, manifold_coverage, manifold_recall, rarity_score,
    vendi_score, Kernel,
};
use smd_scorecard::engine::{calibrate, evaluate, Inputs, DEFAULT_K_PRECISION};
use smd_scorecard::harness::{inject_defect, make_gaussian_mixture, embeddings_to_table, Dataset, Defect, Mode};
use smd_scorecard::hull::hull_area;
use smd_scorecard::ingest::{EvalConfig, GrayImage};
use smd_scorecard::linalg::{knn_radii, Pca};
use smd_scorecard::model::{Column, ColumnKind, Metric, RecordTable, Scope, Value};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

fn numeric_table(names: &[&str], rows: &[Vec<Option<f64>>]) -> RecordTable {
    RecordTable::new(
        names.iter().map(|n| Column::new(*n, ColumnKind::Numeric)).collect(),
        rows.iter().map(|r| r.iter().map(|v| v.map(Value::Number)).collect()).collect(),
    )
    .unwrap()
}

/// Largest eigenvalue by power iteration.
fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let mut v = DMatrix::<f64>::from_element(m.nrows(), 1, 1.0);
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = m * &v;
        lambda = w.norm() / v.norm();
        v = &w / w.norm();
    }
    lambda
}

#[test]
fn pca_leading_ratio_matches_power_iteration() {
    let mut r = rng(11);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let t: f64 = r.random_range(-3.0..3.0);
            vec![t, 0.5 * t + r.random_range(-0.2..0.2), r.random_range(-1.0..1.0), r.random_range(-0.1..0.1)]
        })
        .collect();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..4).map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let cov = DMatrix::from_fn(4, 4, |i, j| {
        rows.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0)
    });
    let pca = Pca::fit(&[&set(&rows)], 2).unwrap();
    close(pca.explained_ratio[0], power_iteration(&cov) / cov.trace(), 1e-6);
    assert!(pca.explained_ratio[0] >= pca.explained_ratio[1]);
}

#[test]
fn knn_radii_match_sorting_oracle() {
    let rows = gaussian_rows(100, 4, 3);
    for k in [1, 5, 17] {
        let got = knn_radii(&set(&rows), k).unwrap();
        for (a, b) in got.iter().zip(kth_radius_oracle(&rows, k)) {
            close(*a, b, 1e-12);
        }
    }
}

#[test]
fn manifold_metrics_match_membership_oracle() {
    let real = gaussian_rows(80, 3, 21);
    let syn: Vec<Vec<f64>> = gaussian_rows(70, 3, 22).into_iter().map(|r| r.iter().map(|v| v * 1.4 + 0.3).collect()).collect();
    let k = 5;
    let p = manifold_precision(&set(&real), &set(&syn), k).unwrap();
    close(value(&p), membership_oracle(&real, &kth_radius_oracle(&real, k), &syn), 1e-12);
    let r = manifold_recall(&set(&real), &set(&syn), k).unwrap();
    close(value(&r), membership_oracle(&syn, &kth_radius_oracle(&syn, k), &real), 1e-12);
    let c = manifold_coverage(&set(&real), &set(&syn), k).unwrap();
    close(value(&c), coverage_oracle(&real, &syn, k), 1e-12);
}

#[test]
fn precision_far_cluster_and_inner_core() {
    let real = gaussian_rows(100, 2, 4);
    let far: Vec<Vec<f64>> = gaussian_rows(30, 2, 5).into_iter().map(|r| vec![r[0] + 50.0, r[1]]).collect();
    assert_eq!(value(&manifold_precision(&set(&real), &set(&far), 5).unwrap()), 0.0);
    let core: Vec<Vec<f64>> = gaussian_rows(30, 2, 6).into_iter().map(|r| vec![r[0] * 0.05, r[1] * 0.05]).collect();
    assert_eq!(value(&manifold_precision(&set(&real), &set(&core), 5).unwrap()), 1.0);
}

#[test]
fn wasserstein_point_masses_and_brute_force_matching() {
    let a = set(&[vec![0.0], vec![1.0]]);
    let b = set(&[vec![0.0], vec![2.0]]);
    close(value(&wasserstein1(&a, &b, EmdMode::PerDimension).unwrap()), 0.5, 1e-12);
    let real = gaussian_rows(7, 2, 31);
    let syn = gaussian_rows(7, 2, 32);
    let got = value(&wasserstein1(&set(&real), &set(&syn), EmdMode::ExactMatching).unwrap());
    close(got, brute_force_emd(&real, &syn), 1e-9);
}

#[test]
fn jsd_closed_form() {
    let p = [0.5, 0.5];
    let q = [1.0, 0.0];
    // M = (0.75, 0.25)
    let oracle = 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2()) + 0.5 * (1.0f64 / 0.75).log2();
    close(jsd_probabilities(&p, &q), oracle, 1e-12);
    close(jsd_probabilities(&p, &p), 0.0, 1e-15);
}

#[test]
fn frechet_diagonal_closed_form() {
    // Symmetric crosses have diagonal sample covariance and known means.
    let cross = |a: f64, b: f64, shift: f64| -> Vec<Vec<f64>> {
        vec![vec![a + shift, 0.0], vec![-a + shift, 0.0], vec![shift, b], vec![shift, -b]]
    };
    let r = cross(1.0, 2.0, 0.0);
    let s = cross(3.0, 1.0, 1.5);
    let var = |x: f64| 2.0 * x * x / 3.0;
    let oracle = 1.5f64.powi(2) + (var(1.0).sqrt() - var(3.0).sqrt()).powi(2) + (var(2.0).sqrt() - var(1.0).sqrt()).powi(2);
    close(value(&frechet_distance(&set(&r), &set(&s)).unwrap()), oracle, 1e-5);
}

#[test]
fn vendi_matches_eigen_oracle() {
    let rows = gaussian_rows(25, 4, 41);
    let n = rows.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
        dot / (rows[i].iter().map(|v| v * v).sum::<f64>().sqrt() * rows[j].iter().map(|v| v * v).sum::<f64>().sqrt())
    }) / n as f64;
    let eig = k.symmetric_eigen().eigenvalues;
    let h: f64 = -eig.iter().filter(|&&l| l > 1e-12).map(|l| l * l.ln()).sum::<f64>();
    close(value(&vendi_score(&set(&rows), Kernel::Cosine, None)), h.exp(), 1e-8);
}

#[test]
fn dpp_matches_lu_determinant() {
    let rows = gaussian_rows(12, 5, 42);
    let n = rows.len();
    let gamma = 0.2;
    let k = DMatrix::from_fn(n, n, |i, j| (-gamma * euclid(&rows[i], &rows[j]).powi(2)).exp() + if i == j { 1e-6 } else { 0.0 });
    let det = k.lu().determinant();
    let got = value(&dpp_logdet(&set(&rows), Kernel::Rbf, Some(gamma), 1e-6));
    close(got, det.ln(), 1e-8 * det.ln().abs().max(1.0));
}

#[test]
fn entropy_of_three_to_one_split() {
    let s = set(&[vec![0.0], vec![0.0], vec![0.0], vec![1.0]]);
    let oracle = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
    close(value(&embedding_entropy(&s, Some(2))), oracle, 1e-12);
    close(oracle, 0.5623, 1e-4);
}

#[test]
fn rarity_matches_oracle() {
    let real = gaussian_rows(60, 2, 51);
    let syn = gaussian_rows(40, 2, 52);
    let k = 3;
    let radii = kth_radius_oracle(&real, k);
    let inside: Vec<f64> = syn
        .iter()
        .filter_map(|s| {
            real.iter().zip(&radii).filter(|(r, rad)| euclid(s, r) <= **rad).map(|(_, rad)| *rad).min_by(f64::total_cmp)
        })
        .collect();
    let oracle = inside.iter().sum::<f64>() / inside.len() as f64;
    close(value(&rarity_score(&set(&real), &set(&syn), k).unwrap()), oracle, 1e-12);
}

#[test]
fn inception_matches_kl_oracle() {
    let probs = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.2, 0.2, 0.6], vec![1.0, 0.0, 0.0]];
    let marginal: Vec<f64> = (0..3).map(|j| probs.iter().map(|p| p[j]).sum::<f64>() / 4.0).collect();
    let kl: f64 = probs
        .iter()
        .map(|p| p.iter().zip(&marginal).filter(|(a, _)| **a > 0.0).map(|(a, m)| a * (a / m).ln()).sum::<f64>())
        .sum::<f64>()
        / 4.0;
    close(value(&inception_style_score(&set(&probs)).unwrap()), kl.exp(), 1e-12);
}

#[test]
fn ssim_matches_naive_windows() {
    let mut r = rng(61);
    let (w, h) = (13, 10);
    let a: Vec<u16> = (0..w * h).map(|_| r.random_range(0..256)).collect();
    let b: Vec<u16> = a.iter().map(|&v| (v as i32 + r.random_range(-20..20)).clamp(0, 255) as u16).collect();
    let img = |p: Vec<u16>| GrayImage { width: w, height: h, max_value: 255, pixels: p };
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - 8 {
        for x0 in 0..=w - 8 {
            let xs: Vec<f64> = (0..64).map(|i| a[(y0 + i / 8) * w + x0 + i % 8] as f64).collect();
            let ys: Vec<f64> = (0..64).map(|i| b[(y0 + i / 8) * w + x0 + i % 8] as f64).collect();
            let mx = xs.iter().sum::<f64>() / 64.0;
            let my = ys.iter().sum::<f64>() / 64.0;
            let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / 64.0;
            let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / 64.0;
            let cxy = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / 64.0;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    close(ssim_pair(&img(a.clone()), &img(b)).unwrap(), total / count as f64, 1e-9);
}

/// p lies in the hull of `pts` iff the directions from p to the points leave
/// no angular gap wider than π.
fn in_hull_2d(p: [f64; 2], pts: &[[f64; 2]]) -> bool {
    let mut angles: Vec<f64> = pts.iter().map(|q| (q[1] - p[1]).atan2(q[0] - p[0])).collect();
    angles.sort_by(f64::total_cmp);
    let mut max_gap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap < std::f64::consts::PI
}

#[test]
fn hull_area_within_two_percent_of_monte_carlo() {
    let mut r = rng(71);
    let pts: Vec<[f64; 2]> = (0..40).map(|_| [r.random_range(-1.0..2.0), r.random_range(0.0..1.5)]).collect();
    let area = hull_area(&pts).volume;
    let samples = 200_000;
    let hits = (0..samples)
        .filter(|_| in_hull_2d([r.random_range(-1.0..2.0), r.random_range(0.0..1.5)], &pts))
        .count();
    let mc = hits as f64 / samples as f64 * 4.5;
    assert!((area - mc).abs() / mc < 0.02, "{area} vs {mc}");
}

#[test]
fn derived_ranges_use_quantile_margin() {
    let rows: Vec<Vec<Option<f64>>> = (0..=10).map(|i| vec![Some(i as f64)]).collect();
    let t = numeric_table(&["x"], &rows);
    let rules = derive_range_rules(&t, &["x".into()], 0.1).unwrap();
    // Q(0.1) = 1 and Q(0.9) = 9, so the range widens by one on each side.
    let probe = numeric_table(&["x"], &[vec![Some(-1.0)], vec![Some(-1.5)], vec![Some(11.0)], vec![Some(11.25)]]);
    let ev = evaluate_rules(&probe, &rules).unwrap();
    assert_eq!(ev.row_magnitude, vec![None, Some(0.5), None, Some(0.25)]);
}

#[test]
fn rule_evaluation_counts_by_hand() {
    let specs: Vec<RuleSpec> = toml::from_str::<toml::Table>(
        r#"
        [[r]]
        kind = "range"
        field = "age"
        min = 0
        max = 120
        [[r]]
        kind = "linear"
        weights = { systolic = 1.0, diastolic = -1.0 }
        bound = 0.0
        sense = ">="
        "#,
    )
    .unwrap()["r"]
        .clone()
        .try_into()
        .unwrap();
    let rules = ConstraintRuleSet::from_specs(&specs).unwrap();
    let t = numeric_table(
        &["age", "systolic", "diastolic"],
        &[
            vec![Some(40.0), Some(120.0), Some(80.0)],
            vec![Some(-3.0), Some(120.0), Some(80.0)],
            vec![Some(50.0), Some(70.0), Some(90.0)],
            vec![Some(130.0), Some(60.0), Some(100.0)],
        ],
    );
    let ev = evaluate_rules(&t, &rules).unwrap();
    let w = 2f64.sqrt();
    let mags: Vec<Option<f64>> = ev.row_magnitude.clone();
    assert_eq!(mags[0], None);
    close(mags[1].unwrap(), 3.0, 1e-12);
    close(mags[2].unwrap(), 20.0 / w, 1e-12);
    close(mags[3].unwrap(), (100.0 + (40.0 / w).powi(2)).sqrt(), 1e-12);
    assert_eq!(ev.violating_rows(), 3);
}

#[test]
fn populated_threshold_tally() {
    let t = numeric_table(
        &["a", "b", "c"],
        &[
            vec![Some(1.0), Some(1.0), None],
            vec![Some(1.0), None, None],
            vec![Some(1.0), Some(1.0), None],
            vec![Some(1.0), None, Some(1.0)],
        ],
    );
    let req: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    // a: 4/4, b: 2/4, c: 1/4, d: absent.
    for (frac, expect) in [(0.0, 3.0), (0.25, 3.0), (0.5, 2.0), (0.75, 1.0), (1.0, 1.0)] {
        close(value(&required_field_proportion(&t, &req, frac).unwrap()), expect / 4.0, 0.0);
    }
}

#[test]
fn privacy_metrics_match_pairwise_oracles() {
    for seed in 0..5 {
        let t = random_privacy_table(60, 2, 3, 3, 80 + seed);
        let qi = vec!["q0".to_string(), "q1".to_string()];
        assert_eq!(value(&k_anonymity(&t, &qi).unwrap()) as usize, k_anonymity_oracle(&t, &[0, 1]));
        assert_eq!(value(&l_diversity(&t, &qi, "s").unwrap()) as usize, l_diversity_oracle(&t, &[0, 1], 2));
        close(value(&t_closeness(&t, &qi, "s").unwrap()), t_closeness_oracle(&t, &[0, 1], 2), 1e-12);
    }
}

/// W1 between empirical distributions by integrating |F − G| over the merged
/// support.
fn w1_by_cdf(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.iter().chain(b).copied().collect();
    xs.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
    xs.windows(2).map(|w| (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0])).sum()
}

#[test]
fn numeric_t_closeness_matches_cdf_oracle() {
    let mut r = rng(91);
    let columns = vec![Column::new("q", ColumnKind::Categorical), Column::new("s", ColumnKind::Numeric)];
    let raw: Vec<(usize, f64)> = (0..50).map(|_| (r.random_range(0..3), r.random_range(0.0..10.0))).collect();
    let t = RecordTable::new(
        columns,
        raw.iter().map(|(q, s)| vec![Some(Value::Label(format!("g{q}"))), Some(Value::Number(*s))]).collect(),
    )
    .unwrap();
    let all: Vec<f64> = raw.iter().map(|x| x.1).collect();
    let range = all.iter().cloned().fold(f64::MIN, f64::max) - all.iter().cloned().fold(f64::MAX, f64::min);
    let oracle = (0..3)
        .map(|g| {
            let cls: Vec<f64> = raw.iter().filter(|x| x.0 == g).map(|x| x.1).collect();
            w1_by_cdf(&cls, &all) / range
        })
        .fold(0.0, f64::max);
    close(value(&t_closeness(&t, &["q".into()], "s").unwrap()), oracle, 1e-9);
}

#[test]
fn leakage_half_copied() {
    let real = gaussian_rows(100, 3, 101);
    let mut syn: Vec<Vec<f64>> = real[..50].to_vec();
    syn.extend(gaussian_rows(50, 3, 102).into_iter().map(|r| r.iter().map(|v| v + 100.0).collect::<Vec<_>>()));
    close(value(&leakage_rate(&set(&real), &set(&syn), None).unwrap()), 0.5, 0.0);
}

#[test]
fn dispersion_by_hand() {
    let d = dispersion(&[Some(0.8), Some(0.9), Some(1.0), None]).unwrap();
    close(d.variance, 0.02 / 3.0, 1e-12);
    close(d.variance, 0.006667, 1e-6);
    close(d.max_min, 0.2, 1e-12);
    assert_eq!((d.used, d.excluded), (3, 1));
}

#[test]
fn anova_matches_textbook_and_integrated_tail() {
    let groups = vec![vec![1.0, 2.0, 3.0, 2.5], vec![2.0, 3.5, 4.0], vec![3.0, 3.2, 5.0, 4.1, 3.9]];
    let (f, d1, d2) = anova_oracle(&groups);
    let a = one_way_anova(&groups).unwrap();
    close(a.f, f, 1e-10);
    assert_eq!((a.df_between, a.df_within), (d1, d2));
    close(a.p_value, f_tail_by_integration(f, d1, d2), 1e-6);
}

#[test]
fn subgroup_scope_equals_manual_filter() {
    let real_rows = gaussian_rows(120, 3, 111);
    let syn_rows = gaussian_rows(90, 3, 112);
    let label = |rows: &[Vec<f64>]| -> Vec<String> { rows.iter().map(|r| if r[0] < 0.0 { "a".into() } else { "b".into() }).collect() };
    let real = set(&real_rows).with_subgroups(label(&real_rows)).unwrap();
    let syn = set(&syn_rows).with_subgroups(label(&syn_rows)).unwrap();
    let cfg = config("metrics = [\"Precision\", \"Recall\"]\n[data]\nsubgroup_column = \"subgroup\"\n");
    let report = evaluate(Inputs::new(syn.clone()).with_real(real.clone()), &cfg).unwrap();
    for g in ["a", "b"] {
        let scope = report.subgroups.iter().find(|s| s.scope == Scope::Subgroup(g.into())).unwrap();
        let r = real.select(&real.subgroup_indices(g));
        let s = syn.select(&syn.subgroup_indices(g));
        close(value(scope.result(Metric::Precision).unwrap()), value(&manifold_precision(&r, &s, DEFAULT_K_PRECISION).unwrap()), 0.0);
        close(value(scope.result(Metric::Recall).unwrap()), value(&manifold_recall(&r, &s, DEFAULT_K_PRECISION).unwrap()), 0.0);
    }
}

#[test]
fn mixture_means_within_four_standard_errors() {
    let modes = vec![
        Mode { mean: vec![0.0, 0.0], scale: 1.0, weight: 1.0 },
        Mode { mean: vec![10.0, -5.0], scale: 2.0, weight: 3.0 },
    ];
    let n = 4000;
    let s = make_gaussian_mixture(n, 2, &modes, 7, "x").unwrap();
    for (i, m) in modes.iter().enumerate() {
        let idx = s.subgroup_indices(&format!("mode{i}"));
        let expected = (n as f64 * m.weight / 4.0).round() as usize;
        assert_eq!(idx.len(), expected);
        let part = s.select(&idx);
        for (got, want) in part.mean().iter().zip(&m.mean) {
            assert!((got - want).abs() < 4.0 * m.scale / (idx.len() as f64).sqrt(), "{got} vs {want}");
        }
    }
}

#[test]
fn duplicate_real_keeps_exact_copies() {
    let real = gaussian(40, 3, 121);
    let out = inject_defect(&Dataset::Embeddings(real.clone()), &Defect::DuplicateReal { fraction: 0.5 }, 9).unwrap();
    let Dataset::Embeddings(syn) = out.data else { panic!("expected embeddings") };
    let exact = syn.rows().filter(|s| real.rows().any(|r| r == *s)).count();
    assert_eq!(exact, 20);
    assert_eq!(out.descriptor.affected.len(), 20);
}

#[test]
fn out_of_range_violates_exactly_ceil_fraction() {
    let base = gaussian(50, 2, 131);
    let table = embeddings_to_table(&base);
    let rules = derive_range_rules(&table, &["f0".into()], 0.0).unwrap();
    let out = inject_defect(
        &Dataset::Table(table),
        &Defect::OutOfRange { field: "f0".into(), fraction: 0.2, magnitude: 3.0 },
        5,
    )
    .unwrap();
    let Dataset::Table(t) = out.data else { panic!("expected table") };
    assert_eq!(evaluate_rules(&t, &rules).unwrap().violating_rows(), 10);
}

#[test]
fn self_split_frechet_lower_bound_near_zero() {
    let real = gaussian(200, 4, 141);
    let cfg = EvalConfig::for_metrics(&[Metric::FrechetDistance]);
    let b = calibrate(&real, None, &cfg).unwrap();
    let [lo, hi] = b.bounds["FrechetDistance"];
    assert!(lo >= 0.0 && lo < hi);
    // Two halves of one Gaussian: FD is small next to the 4-dimensional
    // unit-variance trace.
    assert!(lo < 0.5, "lo = {lo}");
}

fn sample_cov(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    DMatrix::from_fn(d, d, |i, j| rows.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0))
}

#[test]
fn frechet_matches_nonsymmetric_eigen_oracle() {
    let real = gaussian_rows(200, 5, 151);
    let mut r = rng(152);
    let syn: Vec<Vec<f64>> = gaussian_rows(200, 5, 153)
        .into_iter()
        .map(|x| x.iter().enumerate().map(|(j, v)| v * (1.0 + 0.3 * j as f64) + r.random_range(-0.5..0.5)).collect())
        .collect();
    let ridge = DMatrix::<f64>::identity(5, 5) * 1e-6;
    let (cr, cs) = (sample_cov(&real) + &ridge, sample_cov(&syn) + &ridge);
    // Eigenvalues of Σr·Σs are real and nonnegative; Tr sqrt is the sum of
    // their square roots.
    let tr_sqrt: f64 = (&cr * &cs).complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum();
    let mean = |rows: &[Vec<f64>]| (0..5).map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / rows.len() as f64).collect::<Vec<_>>();
    let oracle = euclid(&mean(&real), &mean(&syn)).powi(2) + cr.trace() + cs.trace() - 2.0 * tr_sqrt;
    let got = value(&frechet_distance(&set(&real), &set(&syn)).unwrap());
    assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
}

#[test]
fn centroid_distance_after_translation() {
    let real = gaussian_rows(30, 3, 161);
    let syn = gaussian_rows(40, 3, 162);
    let v = [2.0, -1.0, 0.5];
    let moved: Vec<Vec<f64>> = syn.iter().map(|x| x.iter().zip(&v).map(|(a, b)| a + b).collect()).collect();
    let mean = |rows: &[Vec<f64>]| (0..3).map(|j| rows.iter().map(|x| x[j]).sum::<f64>() / rows.len() as f64).collect::<Vec<_>>();
    let got = value(&smd_scorecard::congruence::distance_to_centroid(&set(&real), &set(&moved)).unwrap());
    close(got, euclid(&mean(&real), &mean(&moved)), 1e-12);
}

/// Facet planes of the hull of `pts` found by testing every triple, as
/// (inward normal, offset) pairs.
fn brute_force_facets(pts: &[[f64; 3]]) -> Vec<([f64; 3], f64)> {
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut planes = Vec::new();
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (u, w) = (sub(pts[j], pts[i]), sub(pts[k], pts[i]));
                let nrm = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
                let (mut pos, mut neg) = (false, false);
                for (m, p) in pts.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let s = dot(nrm, sub(*p, pts[i]));
                    pos |= s > 1e-12;
                    neg |= s < -1e-12;
                    if pos && neg {
                        break;
                    }
                }
                if pos != neg {
                    let sign = if pos { 1.0 } else { -1.0 };
                    let inward = [nrm[0] * sign, nrm[1] * sign, nrm[2] * sign];
                    planes.push((inward, dot(inward, pts[i])));
                }
            }
        }
    }
    planes
}

#[test]
fn hull_volume_3d_within_two_percent_of_monte_carlo() {
    let mut r = rng(171);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    let pts: Vec<[f64; 3]> = rows.iter().map(|x| [x[0], x[1], x[2]]).collect();
    let planes = brute_force_facets(&pts);
    let samples = 100_000;
    let hits = (0..samples)
        .filter(|_| {
            let p = [r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
            planes.iter().all(|(n, c)| n[0] * p[0] + n[1] * p[1] + n[2] * p[2] >= c - 1e-12)
        })
        .count();
    let mc = hits as f64 / samples as f64;
    let got = value(&smd_scorecard::coverage::convex_hull_volume(&set(&rows), 3).unwrap());
    assert!((got - mc).abs() / mc < 0.02, "{got} vs {mc}");
}

#[test]
fn cluster_balance_with_one_outlier() {
    let mut rows: Vec<Vec<f64>> = gaussian_rows(39, 2, 181).into_iter().map(|x| vec![x[0] * 0.1, x[1] * 0.1]).collect();
    rows.push(vec![100.0, 100.0]);
    let n = rows.len() as f64;
    let (p, q) = ((n - 1.0) / n, 1.0 / n);
    let oracle = -(p * p.ln() + q * q.ln()) / 2f64.ln();
    let got = value(&smd_scorecard::coverage::cluster_balance(&set(&rows), Some(2), 3));
    close(got, oracle, 1e-12);
    assert!(got < 0.2);
}

#[test]
fn recall_on_one_of_two_modes() {
    let mut real = gaussian_rows(60, 2, 191);
    real.extend(gaussian_rows(60, 2, 192).into_iter().map(|x| vec![x[0] + 100.0, x[1]]));
    let syn = gaussian_rows(80, 2, 193);
    let got = value(&manifold_recall(&set(&real), &set(&syn), 3).unwrap());
    close(got, membership_oracle(&syn, &kth_radius_oracle(&syn, 3), &real), 1e-12);
    assert!(got <= 0.5 && got > 0.35, "{got}");
}

#[test]
fn rarity_lower_in_dense_region() {
    let mut real: Vec<Vec<f64>> = gaussian_rows(100, 2, 201).into_iter().map(|x| vec![x[0] * 0.1, x[1] * 0.1]).collect();
    real.extend(gaussian_rows(30, 2, 202).into_iter().map(|x| vec![x[0] * 2.0 + 20.0, x[1] * 2.0]));
    let dense = set(&[vec![0.0, 0.0], vec![0.02, -0.01]]);
    let fringe = set(&[vec![20.0, 0.0], vec![20.5, 0.3]]);
    let rd = value(&rarity_score(&set(&real), &dense, 3).unwrap());
    let rf = value(&rarity_score(&set(&real), &fringe, 3).unwrap());
    assert!(rd < rf, "{rd} vs {rf}");
}

/// Linear-interpolated quantile on sorted data, h = (n − 1)·q.
fn quantile_oracle(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[test]
fn quarter_margin_on_uniform_grid() {
    let xs: Vec<f64> = (0..=100).map(f64::from).collect();
    let t = numeric_table(&["x"], &xs.iter().map(|x| vec![Some(*x)]).collect::<Vec<_>>());
    let rules = derive_range_rules(&t, &["x".into()], 0.25).unwrap();
    let lo = 0.0 - (quantile_oracle(&xs, 0.25) - 0.0);
    let hi = 100.0 + (100.0 - quantile_oracle(&xs, 0.75));
    let probe = numeric_table(&["x"], &[vec![Some(lo)], vec![Some(hi)], vec![Some(lo - 1.0)], vec![Some(hi + 2.0)]]);
    let ev = evaluate_rules(&probe, &rules).unwrap();
    assert_eq!(ev.row_magnitude, vec![None, None, Some(1.0), Some(2.0)]);
}

fn mixed_table(rows: &[(&str, f64, &str)]) -> RecordTable {
    RecordTable::new(
        vec![
            Column::new("sex", ColumnKind::Categorical),
            Column::new("age", ColumnKind::Numeric),
            Column::new("pregnant", ColumnKind::Categorical),
        ],
        rows.iter()
            .map(|(s, a, p)| vec![Some(Value::Label(s.to_string())), Some(Value::Number(*a)), Some(Value::Label(p.to_string()))])
            .collect(),
    )
    .unwrap()
}

#[test]
fn compound_rules_match_row_by_row_oracle() {
    let specs: Vec<RuleSpec> = toml::from_str::<toml::Table>(
        r#"
        [[r]]
        kind = "range"
        field = "age"
        min = 0
        max = 100
        [[r]]
        kind = "implication"
        when = { field = "sex", equals = "M" }
        then = { kind = "allowed_set", field = "pregnant", values = ["no"] }
        "#,
    )
    .unwrap()["r"]
        .clone()
        .try_into()
        .unwrap();
    let rules = ConstraintRuleSet::from_specs(&specs).unwrap();
    let rows: Vec<(&str, f64, &str)> = vec![
        ("F", 30.0, "yes"),
        ("M", 30.0, "yes"),
        ("M", 130.0, "no"),
        ("F", -2.0, "no"),
        ("M", 45.0, "no"),
        ("F", 101.0, "yes"),
        ("M", -1.0, "yes"),
        ("F", 0.0, "no"),
        ("M", 100.0, "no"),
        ("F", 55.0, "yes"),
        ("M", 12.0, "yes"),
        ("F", 70.0, "no"),
    ];
    let oracle: Vec<bool> = rows
        .iter()
        .map(|(s, a, p)| !(0.0..=100.0).contains(a) || (*s == "M" && *p != "no"))
        .collect();
    let ev = evaluate_rules(&mixed_table(&rows), &rules).unwrap();
    let got: Vec<bool> = ev.row_magnitude.iter().map(Option::is_some).collect();
    assert_eq!(got, oracle);
    let rate = value(&smd_scorecard::constraint::violation_rate(&mixed_table(&rows), &rules).unwrap());
    close(rate, oracle.iter().filter(|v| **v).count() as f64 / 12.0, 0.0);
}

#[test]
fn margin_matches_per_rule_minimum() {
    let specs: Vec<RuleSpec> = toml::from_str::<toml::Table>(
        r#"
        [[r]]
        kind = "range"
        field = "x"
        min = 0
        max = 10
        [[r]]
        kind = "linear"
        weights = { x = 1.0, y = 1.0 }
        bound = 12.0
        sense = "<="
        "#,
    )
    .unwrap()["r"]
        .clone()
        .try_into()
        .unwrap();
    let rules = ConstraintRuleSet::from_specs(&specs).unwrap();
    let mut r = rng(211);
    let pts: Vec<(f64, f64)> = (0..30).map(|_| (r.random_range(-2.0..12.0), r.random_range(-3.0..8.0))).collect();
    let t = numeric_table(&["x", "y"], &pts.iter().map(|(x, y)| vec![Some(*x), Some(*y)]).collect::<Vec<_>>());
    let margins: Vec<f64> = pts
        .iter()
        .filter(|(x, y)| (0.0..=10.0).contains(x) && x + y <= 12.0)
        .map(|(x, y)| x.min(10.0 - x).min((12.0 - x - y) / 2f64.sqrt()))
        .collect();
    let oracle = margins.iter().sum::<f64>() / margins.len() as f64;
    let got = value(&smd_scorecard::constraint::margin_to_boundary(&t, &rules).unwrap());
    close(got, oracle, 1e-12);
}
