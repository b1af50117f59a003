//! Acceptance criteria 1-8. Runs as a plain binary so the PASS/FAIL lines are
//! always shown; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use smd_scorecard::aggregate::verdict;
use smd_scorecard::card::{build_card, documentation_clarity_score, parse_structured, render, CardFormat, Manifest};
use smd_scorecard::cli::{run, write_fixtures, Cli};
use smd_scorecard::compliance::{k_anonymity, l_diversity, leakage_rate, t_closeness};
use smd_scorecard::congruence::{frechet_distance, psnr_pair, wasserstein1, EmdMode, FRECHET_RIDGE};
use smd_scorecard::consistency::one_way_anova;
use smd_scorecard::constraint::{derive_range_rules, violation_rate};
use smd_scorecard::coverage::{convex_hull_volume, embedding_entropy, manifold_coverage, manifold_recall, vendi_score, Kernel};
use smd_scorecard::completeness::missing_data_percentage;
use smd_scorecard::congruence::manifold_precision;
use smd_scorecard::engine::{evaluate, Inputs};
use smd_scorecard::harness::{
    embeddings_to_table, inject_defect, make_gaussian_mixture, Dataset, Defect, Mode, Recipe,
};
use smd_scorecard::hull::hull_area;
use smd_scorecard::ingest::GrayImage;
use smd_scorecard::model::{catalog, EmbeddingSet, Metric, QualityReport, Thresholds, Verdict};

use clap::Parser;
use common::*;

type Failures = Vec<String>;

fn expect(fails: &mut Failures, ok: bool, what: impl Into<String>) {
    if !ok {
        fails.push(what.into());
    }
}

fn near(fails: &mut Failures, got: f64, want: f64, tol: f64, what: &str) {
    expect(fails, (got - want).abs() <= tol, format!("{what}: got {got}, want {want} ± {tol}"));
}

fn criterion(n: u32, name: &str, limit: Option<Duration>, body: impl FnOnce(&mut Failures)) -> bool {
    let start = Instant::now();
    let mut fails = Vec::new();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| body(&mut fails)));
    if outcome.is_err() {
        fails.push("panicked".into());
    }
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        expect(&mut fails, elapsed < limit, format!("runtime {elapsed:.2?} exceeds {limit:?}"));
    }
    if fails.is_empty() {
        println!("PASS criterion {n}: {name} ({elapsed:.2?})");
        true
    } else {
        println!("FAIL criterion {n}: {name} ({elapsed:.2?})");
        for f in &fails {
            println!("    - {f}");
        }
        false
    }
}

fn threshold_fidelity(f: &mut Failures) {
    let t = Thresholds::default();
    expect(f, verdict(82.0, t) == Verdict::Good, "verdict(82) != good");
    expect(f, verdict(70.0, t) == Verdict::Moderate, "verdict(70) != moderate");
    expect(f, verdict(69.9, t) == Verdict::Low, "verdict(69.9) != low");
    // Sweep in integer hundredths so the expected band is exact.
    for hundredths in 6990..=8010u32 {
        let score = f64::from(hundredths) / 100.0;
        let want = if hundredths >= 8000 {
            Verdict::Good
        } else if hundredths >= 7000 {
            Verdict::Moderate
        } else {
            Verdict::Low
        };
        let got = verdict(score, t);
        expect(f, got == want, format!("verdict({score}) = {got:?}, want {want:?}"));
    }
}

fn identity_suite(f: &mut Failures) {
    let rows = gaussian_rows(500, 16, 11);
    let real = set(&rows);
    let cfg = config(
        r#"
metrics = ["CosineSimilarity", "EarthMoversDistance", "JensenShannonDivergence", "FrechetDistance",
           "Precision", "Recall", "Coverage", "CentroidDistance", "CentroidSpread", "LeakageRate"]
[bounds]
EarthMoversDistance = [0.0, 1.0]
FrechetDistance = [0.0, 10.0]
CentroidDistance = [0.0, 1.0]
CentroidSpread = [0.0, 10.0]
"#,
    );
    let report = evaluate(Inputs::new(real.clone()).with_real(real.clone()), &cfg).expect("evaluate");
    let get = |m: Metric| report.global.result(m).map(value).unwrap_or(f64::NAN);
    near(f, get(Metric::CosineSimilarity), 1.0, 1e-9, "cosine");
    near(f, get(Metric::EarthMoversDistance), 0.0, 1e-9, "W1");
    near(f, get(Metric::JensenShannonDivergence), 0.0, 1e-9, "JSD");
    let fd = get(Metric::FrechetDistance);
    expect(f, (0.0..=1e-6).contains(&fd), format!("Frechet {fd} > 1e-6"));
    near(f, get(Metric::Precision), 1.0, 0.0, "precision");
    near(f, get(Metric::Recall), 1.0, 0.0, "recall");
    near(f, get(Metric::Coverage), 1.0, 0.0, "coverage");
    near(f, get(Metric::CentroidDistance), 0.0, 1e-9, "centroid distance");
    // Spread about the real centroid equals the real set's own spread.
    let centroid: Vec<f64> = (0..16).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 500.0).collect();
    let own = rows.iter().map(|r| euclid(r, &centroid)).sum::<f64>() / 500.0;
    near(f, get(Metric::CentroidSpread) - own, 0.0, 1e-9, "centroid spread deviation");
    near(f, get(Metric::LeakageRate), 1.0, 0.0, "leakage rate");
}

fn closed_forms(f: &mut Failures) {
    // Frechet on a shifted copy: covariances are equal, so FD = |delta mu|^2.
    let rows = gaussian_rows(300, 4, 5);
    let delta = [0.5, -1.0, 2.0, 0.25];
    let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&delta).map(|(a, b)| a + b).collect()).collect();
    let fd = value(&frechet_distance(&set(&rows), &set(&shifted)).unwrap());
    let want: f64 = delta.iter().map(|d| d * d).sum();
    near(f, fd, want, 1e-6, "Frechet of shifted copy");

    let same = set(&vec![vec![0.3, -1.2, 2.0]; 12]);
    near(f, value(&vendi_score(&same, Kernel::Cosine, None)), 1.0, 1e-6, "Vendi identical rows");
    let n = 6;
    let eye: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    near(f, value(&vendi_score(&set(&eye), Kernel::Cosine, None)), n as f64, 1e-6, "Vendi orthonormal rows");

    let uniform: Vec<Vec<f64>> = (0..8).flat_map(|b| std::iter::repeat_n(vec![b as f64 + 0.5], 5)).collect();
    near(f, value(&embedding_entropy(&set(&uniform), Some(8))), 8f64.ln(), 1e-9, "entropy of uniform 8 bins");

    let a: Vec<u16> = (0..64).map(|i| (i * 3 % 250) as u16 + 2).collect();
    let b: Vec<u16> = a.iter().enumerate().map(|(i, p)| if i % 2 == 0 { p + 1 } else { p - 1 }).collect();
    let (ga, gb) = (GrayImage::new(8, 8, 255, a).unwrap(), GrayImage::new(8, 8, 255, b).unwrap());
    near(f, psnr_pair(&ga, &gb), 20.0 * 255f64.log10(), 1e-6, "PSNR at unit MSE");

    let square = hull_area(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
    expect(f, square.volume == 1.0, format!("unit square hull area {}", square.volume));
    let sq = set(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
    let via_metric = value(&convex_hull_volume(&sq, 2).unwrap());
    expect(f, via_metric == 1.0, format!("unit square via metric {via_metric}"));
}

fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    DMatrix::from_fn(d, d, |i, j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0))
}

/// FID through the eigenvalues of the non-symmetric product Σr·Σs.
fn fid_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = a[0].len();
    let ridge = DMatrix::<f64>::identity(d, d) * FRECHET_RIDGE;
    let (ca, cb) = (covariance(a) + &ridge, covariance(b) + &ridge);
    let mean = |r: &[Vec<f64>], j: usize| r.iter().map(|x| x[j]).sum::<f64>() / r.len() as f64;
    let mean_term: f64 = (0..d).map(|j| (mean(a, j) - mean(b, j)).powi(2)).sum();
    let eig = (&ca * &cb).complex_eigenvalues();
    let tr_sqrt: f64 = eig.iter().map(|z| z.re.max(0.0).sqrt()).sum();
    mean_term + ca.trace() + cb.trace() - 2.0 * tr_sqrt
}

fn oracle_equivalence(f: &mut Failures) {
    let a = gaussian_rows(200, 5, 21);
    let b: Vec<Vec<f64>> = gaussian_rows(200, 5, 22)
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| v * (1.0 + 0.3 * j as f64) + 0.4).collect())
        .collect();
    let got = value(&frechet_distance(&set(&a), &set(&b)).unwrap());
    let want = fid_oracle(&a, &b);
    expect(f, ((got - want) / want).abs() <= 1e-6, format!("FID {got} vs oracle {want}"));

    for seed in 0..5 {
        let n = 7 + (seed as usize % 2);
        let r = gaussian_rows(n, 3, 100 + seed);
        let s = gaussian_rows(n, 3, 200 + seed);
        let got = value(&wasserstein1(&set(&r), &set(&s), EmdMode::ExactMatching).unwrap());
        near(f, got, brute_force_emd(&r, &s), 1e-9, &format!("exact EMD seed {seed}"));
    }

    let real = gaussian_rows(100, 4, 31);
    let syn: Vec<Vec<f64>> = gaussian_rows(100, 4, 32).into_iter().map(|r| r.iter().map(|v| v * 1.4).collect()).collect();
    let (rs, ss) = (set(&real), set(&syn));
    for k in [1, 3, 5] {
        let p = value(&manifold_precision(&rs, &ss, k).unwrap());
        near(f, p, membership_oracle(&real, &kth_radius_oracle(&real, k), &syn), 0.0, &format!("precision k={k}"));
        let rc = value(&manifold_recall(&rs, &ss, k).unwrap());
        near(f, rc, membership_oracle(&syn, &kth_radius_oracle(&syn, k), &real), 0.0, &format!("recall k={k}"));
        let c = value(&manifold_coverage(&rs, &ss, k).unwrap());
        near(f, c, coverage_oracle(&real, &syn, k), 0.0, &format!("coverage k={k}"));
    }

    let mut r = rng(41);
    use rand::Rng;
    let groups: Vec<Vec<f64>> = (0..3)
        .map(|g| (0..10).map(|_| g as f64 * 0.4 + r.random::<f64>()).collect())
        .collect();
    let anova = one_way_anova(&groups).unwrap();
    let (f_want, d1, d2) = anova_oracle(&groups);
    near(f, anova.f, f_want, 1e-9 * f_want.max(1.0), "ANOVA F");
    near(f, anova.p_value, f_tail_by_integration(anova.f, d1, d2), 1e-6, "ANOVA p");

    for seed in 0..4 {
        let t = random_privacy_table(50, 2, 3, 4, 300 + seed);
        let qi = vec!["q0".to_string(), "q1".to_string()];
        let k = value(&k_anonymity(&t, &qi).unwrap());
        near(f, k, k_anonymity_oracle(&t, &[0, 1]) as f64, 0.0, "k-anonymity");
        let l = value(&l_diversity(&t, &qi, "s").unwrap());
        near(f, l, l_diversity_oracle(&t, &[0, 1], 2) as f64, 0.0, "l-diversity");
        let tc = value(&t_closeness(&t, &qi, "s").unwrap());
        near(f, tc, t_closeness_oracle(&t, &[0, 1], 2), 1e-12, "t-closeness");
    }
}

fn two_mode_fixture() -> (EmbeddingSet, EmbeddingSet) {
    let modes = vec![
        Mode { mean: vec![0.0, 0.0, 0.0], scale: 1.0, weight: 1.0 },
        Mode { mean: vec![8.0, 8.0, 0.0], scale: 1.0, weight: 1.0 },
    ];
    let real = make_gaussian_mixture(200, 3, &modes, 1, "r").unwrap();
    let syn = make_gaussian_mixture(200, 3, &modes, 2, "s").unwrap();
    (real, syn)
}

fn embeddings(d: Dataset) -> EmbeddingSet {
    match d {
        Dataset::Embeddings(e) => e,
        Dataset::Table(_) => panic!("expected embeddings"),
    }
}

fn table(d: Dataset) -> smd_scorecard::model::RecordTable {
    match d {
        Dataset::Table(t) => t,
        Dataset::Embeddings(_) => panic!("expected a table"),
    }
}

fn max_min_for(real: &EmbeddingSet, syn: &EmbeddingSet) -> f64 {
    let cfg = config(
        r#"
metrics = ["FrechetDistance", "MaxMinDifference"]
[bounds]
FrechetDistance = [0.0, 10.0]
[data]
subgroup_column = "subgroup"
[consistency]
base_metrics = ["FrechetDistance"]
"#,
    );
    let report = evaluate(Inputs::new(syn.clone()).with_real(real.clone()), &cfg).unwrap();
    value(report.global.targeted(Metric::MaxMinDifference, Metric::FrechetDistance).unwrap())
}

fn directional_suite(f: &mut Failures) {
    let (real, base) = two_mode_fixture();
    let n = base.len();

    let dropped = embeddings(inject_defect(&Dataset::Embeddings(base.clone()), &Defect::ModeDrop { mode: "mode1".into() }, 3).unwrap().data);
    let (r0, r1) = (value(&manifold_recall(&real, &base, 5).unwrap()), value(&manifold_recall(&real, &dropped, 5).unwrap()));
    expect(f, r1 < r0, format!("mode_drop recall {r1} not below baseline {r0}"));
    let (c0, c1) = (value(&manifold_coverage(&real, &base, 5).unwrap()), value(&manifold_coverage(&real, &dropped, 5).unwrap()));
    expect(f, c1 < c0, format!("mode_drop coverage {c1} not below baseline {c0}"));

    let base_leak = value(&leakage_rate(&real, &base, None).unwrap());
    for frac in [0.1, 0.3, 0.5] {
        let dup = embeddings(inject_defect(&Dataset::Embeddings(real.clone()), &Defect::DuplicateReal { fraction: frac }, 4).unwrap().data);
        let leak = value(&leakage_rate(&real, &dup, None).unwrap());
        expect(f, leak >= frac, format!("duplicate_real({frac}) leakage {leak} < {frac}"));
        expect(f, leak > base_leak, format!("duplicate_real({frac}) leakage {leak} not above baseline {base_leak}"));
    }

    let real_table = embeddings_to_table(&real);
    let base_table = embeddings_to_table(&base);
    let rules = derive_range_rules(&real_table, &["f0".to_string()], 0.0).unwrap();
    let v0 = value(&violation_rate(&base_table, &rules).unwrap());
    for frac in [0.05, 0.2] {
        let d = Defect::OutOfRange { field: "f0".into(), fraction: frac, magnitude: 5.0 };
        let t = table(inject_defect(&Dataset::Table(base_table.clone()), &d, 5).unwrap().data);
        let v = value(&violation_rate(&t, &rules).unwrap());
        expect(f, v >= frac - 1.0 / n as f64, format!("out_of_range({frac}) rate {v}"));
        expect(f, v > v0, format!("out_of_range({frac}) rate {v} not above baseline {v0}"));
    }

    let cells = (base_table.n_rows() * base_table.n_cols()) as f64;
    let m0 = value(&missing_data_percentage(&base_table));
    for frac in [0.05, 0.25] {
        let t = table(inject_defect(&Dataset::Table(base_table.clone()), &Defect::MaskCells { fraction: frac }, 6).unwrap().data);
        let m = value(&missing_data_percentage(&t));
        near(f, m, frac, 1.0 / cells, &format!("mask_cells({frac})"));
        expect(f, m > m0, format!("mask_cells({frac}) {m} not above baseline {m0}"));
    }

    let before = max_min_for(&real, &base);
    let skew = Defect::SubgroupSkew { subgroup: "mode1".into(), noise_scale: 1.5 };
    let skewed = embeddings(inject_defect(&Dataset::Embeddings(base.clone()), &skew, 7).unwrap().data);
    let after = max_min_for(&real, &skewed);
    expect(f, after > before, format!("subgroup_skew max-min {after} not above baseline {before}"));
}

fn card_schema(f: &mut Failures) {
    let manifest = Manifest::from_toml_str(FULL_MANIFEST).unwrap();
    let card = build_card(&manifest, None).unwrap();
    let golden: BTreeSet<(u8, String)> = golden_rows(include_str!("golden/card_fields.tsv"))
        .into_iter()
        .map(|r| (r[0].parse().unwrap(), r[1].clone()))
        .collect();
    let rendered: BTreeSet<(u8, String)> = card
        .sections
        .iter()
        .flat_map(|s| s.fields.iter().map(move |fl| (s.number, fl.label.clone())))
        .collect();
    let field_count: usize = card.sections.iter().map(|s| s.fields.len()).sum();
    expect(f, field_count == golden.len(), format!("{field_count} rendered fields, {} golden", golden.len()));
    for missing in golden.difference(&rendered) {
        f.push(format!("golden field missing from card: {missing:?}"));
    }
    for extra in rendered.difference(&golden) {
        f.push(format!("card field not in golden list: {extra:?}"));
    }

    let text = render(&card, CardFormat::Structured);
    let again = render(&parse_structured(&text).unwrap(), CardFormat::Structured);
    expect(f, text == again, "structured round trip not byte-identical");

    expect(f, documentation_clarity_score(&manifest).0 == 10, "rubric on full manifest != 10");
    expect(f, documentation_clarity_score(&Manifest::default()).0 == 1, "rubric on empty manifest != 1");
    let four = Manifest::from_toml_str(FOUR_ITEM_MANIFEST).unwrap();
    expect(f, documentation_clarity_score(&four).0 == 5, "rubric on four-item manifest != 5");
}

fn determinism(f: &mut Failures) {
    let dir = tempfile::tempdir().unwrap();
    let recipe = Recipe::from_toml_str(
        "seed = 9\nn = 240\nd = 4\n[[modes]]\nmean = [0.0, 0.0, 0.0, 0.0]\nscale = 1.0\n[[modes]]\nmean = [5.0, 0.0, 5.0, 0.0]\nscale = 1.5\n",
    )
    .unwrap();
    write_fixtures(&recipe, dir.path()).unwrap();
    std::fs::write(
        dir.path().join("config.toml"),
        r#"
metrics = ["CosineSimilarity", "FrechetDistance", "JensenShannonDivergence", "Precision", "Recall",
           "Coverage", "VendiScore", "ClusteringBalance", "LeakageRate", "MissingDataPercentage",
           "ConstraintViolationRate", "SubgroupVariance", "MaxMinDifference", "AnalysisOfVariance"]
[bounds]
FrechetDistance = [0.0, 20.0]
VendiScore = [1.0, 10.0]
[data]
subgroup_column = "subgroup"
reference_table = "real_table.csv"
[constraints.derive]
fields = ["f0", "f1", "f2", "f3"]
[consistency]
base_metrics = ["Precision", "FrechetDistance"]
bootstrap = 40
"#,
    )
    .unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let run_to = |out: &str| {
        let args = [
            "smdcard", "evaluate", "--real", &p("real.csv"), "--synthetic", &p("synthetic.csv"), "--table",
            &p("synthetic_table.csv"), "--config", &p("config.toml"), "--out", &p(out),
        ];
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(Cli::parse_from(args), &mut o, &mut e);
        (code, String::from_utf8_lossy(&e).into_owned())
    };
    let (c1, e1) = run_to("a.json");
    let (c2, _) = run_to("b.json");
    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let (c3, _) = pool(1).install(|| run_to("c.json"));
    let (c4, _) = pool(4).install(|| run_to("d.json"));
    expect(f, [c1, c2, c3, c4] == [0; 4], format!("exit codes {:?}; stderr: {e1}", [c1, c2, c3, c4]));
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap_or_default();
    let a = read("a.json");
    expect(f, !a.is_empty(), "no report written");
    for other in ["b.json", "c.json", "d.json"] {
        expect(f, read(other) == a, format!("{other} differs from a.json"));
    }
    if let Ok(report) = serde_json::from_slice::<QualityReport>(&a) {
        expect(f, report.is_intact(), "report digest does not verify");
        expect(f, report.global.targeted(Metric::AnalysisOfVariance, Metric::Precision).is_some(), "consistency not computed");
    }
}

fn descriptor_fidelity(f: &mut Failures) {
    let golden = golden_rows(include_str!("golden/metric_catalog.tsv"));
    let rows: Vec<_> = catalog().collect();
    expect(f, rows.len() == golden.len(), format!("{} catalog rows, {} golden", rows.len(), golden.len()));
    for (i, (d, g)) in rows.iter().zip(&golden).enumerate() {
        let got = [
            d.criterion.as_str().to_string(),
            d.label.to_string(),
            d.space.label().to_string(),
            d.arity.label().to_string(),
            d.direction.label().to_string(),
            if d.image_only { "Yes" } else { "No" }.to_string(),
        ];
        expect(f, got.as_slice() == g.as_slice(), format!("row {}: {got:?} vs golden {g:?}", i + 1));
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "threshold fidelity", Some(secs(1)), threshold_fidelity),
        criterion(2, "identity optimum", Some(secs(10)), identity_suite),
        criterion(3, "closed forms", None, closed_forms),
        criterion(4, "oracle equivalence", Some(secs(60)), oracle_equivalence),
        criterion(5, "directional sensitivity", Some(secs(30)), directional_suite),
        criterion(6, "card schema completeness", Some(secs(5)), card_schema),
        criterion(7, "determinism", Some(secs(20)), determinism),
        criterion(8, "metric descriptor fidelity", None, descriptor_fidelity),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
