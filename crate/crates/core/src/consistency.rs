//! Consistency: dispersion of per-subgroup metric values and one-way ANOVA
//! over bootstrap replicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::aggregate::normalize;
use crate::engine::{compute_metric, Inputs, Plan, View};
use crate::error::Result;
use crate::model::{Metric, MetricResult, MetricValue};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    /// Population variance.
    pub variance: f64,
    pub max_min: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Spread of the defined values; `None` with fewer than two.
pub fn dispersion(values: &[Option<f64>]) -> Option<Dispersion> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.len() < 2 {
        return None;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let variance = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    Some(Dispersion {
        variance,
        max_min: max - min,
        used: defined.len(),
        excluded: values.len() - defined.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anova {
    /// `+inf` when within-group variance is zero and between-group is not.
    pub f: f64,
    pub p_value: f64,
    pub df_between: f64,
    pub df_within: f64,
}

/// Upper tail of the F distribution.
pub fn f_survival(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f == f64::INFINITY {
        return 0.0;
    }
    beta_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

/// One-way ANOVA; `Err` carries the reason the statistic is undefined.
pub fn one_way_anova(groups: &[Vec<f64>]) -> std::result::Result<Anova, String> {
    if groups.len() < 2 {
        return Err("needs at least 2 groups".into());
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(format!("group {} has fewer than 2 samples", i + 1));
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df1 = (groups.len() - 1) as f64;
    let df2 = (total - groups.len()) as f64;
    let ms_between = ss_between / df1;
    let ms_within = ss_within / df2;
    // Relative zero test: sums of squares are exact zeros only for constant data.
    let scale = groups.iter().flatten().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let tiny = scale * 1e-24;
    let f = match (ss_within <= tiny, ss_between <= tiny) {
        (true, true) => return Err("zero within- and between-group variance (0/0)".into()),
        (true, false) => f64::INFINITY,
        _ => ms_between / ms_within,
    };
    Ok(Anova {
        f,
        p_value: f_survival(f, df1, df2),
        df_between: df1,
        df_within: df2,
    })
}

/// 64-bit FNV-1a, used to derive per-task seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for bootstrap replicate `replicate` of subgroup `label`.
pub fn replicate_seed(seed: u64, label: &str, replicate: usize) -> u64 {
    let mut key = label.as_bytes().to_vec();
    key.push(0);
    key.extend_from_slice(&(replicate as u64).to_le_bytes());
    seed ^ fnv1a(&key)
}

/// Base metric values for each subgroup, in label order.
pub fn per_subgroup_metrics(
    plan: &Plan<'_>,
    inputs: &Inputs,
    labels: &[String],
    bases: &[Metric],
) -> Result<Vec<(String, Vec<MetricResult>)>> {
    labels
        .par_iter()
        .map(|label| {
            let view = View::subgroup(inputs, plan, label);
            let results = bases
                .iter()
                .map(|&m| compute_metric(m, &view, inputs, plan, false))
                .collect::<Result<Vec<_>>>()?;
            Ok((label.clone(), results))
        })
        .collect()
}

fn resample(rng: &mut ChaCha8Rng, indices: &[usize]) -> Vec<usize> {
    (0..indices.len())
        .map(|_| indices[rng.random_range(0..indices.len())])
        .collect()
}

/// `replicates` bootstrap values of each base metric in one subgroup:
/// `out[b]` lists the finite raw values of `bases[b]`.
fn bootstrap_subgroup(
    plan: &Plan<'_>,
    inputs: &Inputs,
    label: &str,
    bases: &[Metric],
    replicates: usize,
) -> Result<Vec<Vec<f64>>> {
    let base_view = View::subgroup(inputs, plan, label);
    let syn_rows = inputs.synthetic.subgroup_indices(label);
    let table_rows = plan.table_subgroup_rows(inputs, label);
    let values: Vec<Vec<Option<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(plan.config.seed, label, r));
            let view = base_view.resampled(inputs, &resample(&mut rng, &syn_rows), table_rows.as_deref().map(|t| resample(&mut rng, t)));
            bases
                .iter()
                .map(|&m| Ok(compute_metric(m, &view, inputs, plan, false)?.value.finite()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..bases.len())
        .map(|b| values.iter().filter_map(|rep| rep[b]).collect())
        .collect())
}

/// The selected consistency metrics for every base metric, at global scope.
pub fn consistency_results(
    plan: &Plan<'_>,
    inputs: &Inputs,
    per_subgroup: &[(String, Vec<MetricResult>)],
    bases: &[Metric],
) -> Result<Vec<MetricResult>> {
    let config = plan.config;
    let selected: Vec<Metric> = config.metrics.iter().copied().filter(|m| m.is_consistency()).collect();
    let samples = if selected.contains(&Metric::AnalysisOfVariance) {
        per_subgroup
            .par_iter()
            .map(|(label, _)| bootstrap_subgroup(plan, inputs, label, bases, config.bootstrap))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut out = Vec::new();
    for &metric in &selected {
        for (b, &base) in bases.iter().enumerate() {
            let mut normalized = Vec::with_capacity(per_subgroup.len());
            let mut diags = Vec::new();
            for (label, results) in per_subgroup {
                let r = &results[b];
                let n = normalize(r, config.bounds.get(&base).copied()).ok();
                if let Some(v) = r.value.as_f64() {
                    diags.push((format!("raw:{label}"), v));
                }
                if let Some(v) = n {
                    diags.push((format!("normalized:{label}"), v));
                }
                normalized.push(n);
            }
            let mut result = match metric {
                Metric::SubgroupVariance | Metric::MaxMinDifference => match dispersion(&normalized) {
                    Some(d) => {
                        let v = if metric == Metric::SubgroupVariance { d.variance } else { d.max_min };
                        MetricResult::new(metric, v)
                            .with_diag("subgroups_used", d.used as f64)
                            .with_diag("subgroups_excluded", d.excluded as f64)
                    }
                    None => MetricResult::undefined(metric, "fewer than 2 subgroups with a defined value"),
                },
                Metric::AnalysisOfVariance => {
                    let groups: Vec<Vec<f64>> = samples.iter().map(|s| s[b].clone()).collect();
                    match one_way_anova(&groups) {
                        Ok(a) => MetricResult::new(metric, MetricValue::from(a.f))
                            .with_diag("p_value", a.p_value)
                            .with_diag("df_between", a.df_between)
                            .with_diag("df_within", a.df_within)
                            .with_diag("replicates", config.bootstrap as f64),
                        Err(reason) => MetricResult::undefined(metric, reason),
                    }
                }
                _ => unreachable!("only consistency metrics are selected here"),
            };
            if metric != Metric::AnalysisOfVariance {
                for (k, v) in &diags {
                    result = result.with_diag(k, *v);
                }
            }
            out.push(result.with_target(base));
        }
    }
    Ok(out)
}
