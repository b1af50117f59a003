//! Compliance: anonymity metrics over quasi-identifiers, near-duplicate
//! leakage, and pass-through of declared privacy parameters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::congruence::{check_dims, wasserstein1_1d};
use crate::error::{Error, Result};
use crate::linalg::{knn_distances, quantile_sorted, sorted};
use crate::model::{ColumnKind, DeclaredEntry, EmbeddingSet, Metric, MetricResult, RecordTable, Value};

/// Quantile of real-to-real nearest-neighbour distances used as the default
/// leakage radius.
pub const LEAKAGE_QUANTILE: f64 = 0.01;

type ClassKey = Vec<Option<String>>;

/// Rows grouped by their joint quasi-identifier values. A missing QI value is
/// its own key component, so such rows form separate classes.
pub struct EquivalenceClasses {
    pub classes: BTreeMap<ClassKey, Vec<usize>>,
    pub rows_with_missing_qi: usize,
}

pub fn equivalence_classes(data: &RecordTable, quasi_identifiers: &[String]) -> Result<EquivalenceClasses> {
    if quasi_identifiers.is_empty() {
        return Err(Error::Precondition("no quasi-identifiers configured".into()));
    }
    if data.n_rows() == 0 {
        return Err(Error::InvalidData("record table has no rows".into()));
    }
    let cols = quasi_identifiers
        .iter()
        .map(|q| data.require_column(q))
        .collect::<Result<Vec<_>>>()?;
    let mut classes: BTreeMap<ClassKey, Vec<usize>> = BTreeMap::new();
    let mut rows_with_missing_qi = 0;
    for (i, row) in data.rows().iter().enumerate() {
        let key: ClassKey = cols.iter().map(|&c| row[c].as_ref().map(Value::key)).collect();
        if key.iter().any(Option::is_none) {
            rows_with_missing_qi += 1;
        }
        classes.entry(key).or_default().push(i);
    }
    Ok(EquivalenceClasses {
        classes,
        rows_with_missing_qi,
    })
}

fn flag_missing(r: MetricResult, ec: &EquivalenceClasses) -> MetricResult {
    let r = r.with_diag("classes", ec.classes.len() as f64);
    if ec.rows_with_missing_qi > 0 {
        r.with_diag("rows_with_missing_qi", ec.rows_with_missing_qi as f64)
            .with_note("rows with missing quasi-identifiers form their own classes")
    } else {
        r
    }
}

/// Smallest equivalence-class size.
pub fn k_anonymity(data: &RecordTable, quasi_identifiers: &[String]) -> Result<MetricResult> {
    let ec = equivalence_classes(data, quasi_identifiers)?;
    let k = ec.classes.values().map(Vec::len).min().expect("nonempty table");
    Ok(flag_missing(MetricResult::new(Metric::KAnonymity, k as f64), &ec).with_diag("rows", data.n_rows() as f64))
}

fn sensitive_column(data: &RecordTable, sensitive: &str) -> Result<usize> {
    data.require_column(sensitive)
}

/// Smallest number of distinct sensitive values in any class (missing
/// sensitive values are not counted).
pub fn l_diversity(data: &RecordTable, quasi_identifiers: &[String], sensitive: &str) -> Result<MetricResult> {
    let s = sensitive_column(data, sensitive)?;
    let ec = equivalence_classes(data, quasi_identifiers)?;
    let mut skipped = 0;
    let l = ec
        .classes
        .values()
        .filter_map(|rows| {
            let distinct: BTreeSet<String> = rows.iter().filter_map(|&i| data.cell(i, s).map(Value::key)).collect();
            if distinct.is_empty() {
                skipped += 1;
                None
            } else {
                Some(distinct.len())
            }
        })
        .min();
    let Some(l) = l else {
        return Ok(MetricResult::undefined(Metric::LDiversity, "sensitive column entirely missing"));
    };
    let global: BTreeSet<String> = (0..data.n_rows()).filter_map(|i| data.cell(i, s).map(Value::key)).collect();
    let mut r = flag_missing(MetricResult::new(Metric::LDiversity, l as f64), &ec)
        .with_diag("distinct_sensitive", global.len() as f64);
    if skipped > 0 {
        r = r.with_diag("classes_without_sensitive_value", skipped as f64);
    }
    Ok(r)
}

fn distribution(values: &[String]) -> BTreeMap<&str, f64> {
    let mut m: BTreeMap<&str, f64> = BTreeMap::new();
    for v in values {
        *m.entry(v.as_str()).or_default() += 1.0;
    }
    let n = values.len() as f64;
    m.values_mut().for_each(|c| *c /= n);
    m
}

/// Total variation distance between two categorical distributions.
pub fn total_variation(p: &BTreeMap<&str, f64>, q: &BTreeMap<&str, f64>) -> f64 {
    let keys: BTreeSet<&str> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Largest distance between any class's sensitive-value distribution and the
/// global one: total variation for categorical columns, 1-D EMD divided by
/// the observed range for numeric columns.
pub fn t_closeness(data: &RecordTable, quasi_identifiers: &[String], sensitive: &str) -> Result<MetricResult> {
    let s = sensitive_column(data, sensitive)?;
    let numeric = data.kind(sensitive) == Some(ColumnKind::Numeric);
    let ec = equivalence_classes(data, quasi_identifiers)?;
    let t = if numeric {
        let global: Vec<f64> = data.numeric_values(sensitive)?;
        if global.is_empty() {
            return Ok(MetricResult::undefined(Metric::TCloseness, "sensitive column entirely missing"));
        }
        let s_sorted = sorted(&global);
        let range = s_sorted[s_sorted.len() - 1] - s_sorted[0];
        if range == 0.0 {
            0.0
        } else {
            ec.classes
                .values()
                .filter_map(|rows| {
                    let vals: Vec<f64> = rows.iter().filter_map(|&i| data.number(i, s)).collect();
                    (!vals.is_empty()).then(|| wasserstein1_1d(&vals, &global) / range)
                })
                .fold(0.0, f64::max)
        }
    } else {
        let global: Vec<String> = data.rows().iter().filter_map(|r| r[s].as_ref().map(Value::key)).collect();
        if global.is_empty() {
            return Ok(MetricResult::undefined(Metric::TCloseness, "sensitive column entirely missing"));
        }
        let gd = distribution(&global);
        ec.classes
            .values()
            .filter_map(|rows| {
                let vals: Vec<String> = rows.iter().filter_map(|&i| data.cell(i, s).map(Value::key)).collect();
                (!vals.is_empty()).then(|| total_variation(&distribution(&vals), &gd))
            })
            .fold(0.0, f64::max)
    };
    let ground = if numeric { "normalized-emd" } else { "total-variation" };
    Ok(flag_missing(MetricResult::new(Metric::TCloseness, t), &ec).with_note(format!("ground distance: {ground}")))
}

/// Default leakage radius: the 1st percentile of real-to-real nearest
/// neighbour distances.
pub fn default_leakage_tau(real: &EmbeddingSet) -> Result<f64> {
    if real.len() < 2 {
        return Err(Error::Precondition(
            "leakage radius needs at least 2 real rows".into(),
        ));
    }
    let nn = knn_distances(real, real, 1, true)?.kth();
    Ok(quantile_sorted(&sorted(&nn), LEAKAGE_QUANTILE))
}

/// Fraction of synthetic points whose nearest real neighbour is within `tau`.
pub fn leakage_rate(real: &EmbeddingSet, synthetic: &EmbeddingSet, tau: Option<f64>) -> Result<MetricResult> {
    check_dims(real, synthetic)?;
    let tau = match tau {
        Some(t) => t,
        None => default_leakage_tau(real)?,
    };
    let nn = knn_distances(synthetic, real, 1, false)?.kth();
    let leaked = nn.iter().filter(|&&d| d <= tau).count();
    Ok(MetricResult::new(Metric::LeakageRate, leaked as f64 / synthetic.len() as f64)
        .with_diag("tau", tau)
        .with_diag("leaked_rows", leaked as f64))
}

/// Privacy parameters and standards declared by the data producer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredPrivacy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymization_method: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub standards: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub formats: Vec<String>,
}

const NOT_DECLARED: &str = "not declared";

fn listed(items: &[String]) -> String {
    if items.is_empty() {
        NOT_DECLARED.into()
    } else {
        format!("{} (declared)", items.join(", "))
    }
}

/// Card entries for the declared parameters, flagged as declared only.
pub fn declared_privacy_record(declared: &DeclaredPrivacy) -> Vec<DeclaredEntry> {
    let dp = match (declared.epsilon, declared.delta) {
        (Some(e), Some(d)) => format!("ε={e:?}, δ={d:?} (declared)"),
        (Some(e), None) => format!("ε={e:?} (declared)"),
        (None, Some(d)) => format!("δ={d:?} (declared)"),
        (None, None) => NOT_DECLARED.into(),
    };
    vec![
        DeclaredEntry {
            field: "Differential privacy".into(),
            value: dp,
        },
        DeclaredEntry {
            field: "Anonymization method".into(),
            value: declared
                .anonymization_method
                .as_ref()
                .map_or_else(|| NOT_DECLARED.into(), |m| format!("{m} (declared)")),
        },
        DeclaredEntry {
            field: "Standards".into(),
            value: listed(&declared.standards),
        },
        DeclaredEntry {
            field: "Formats".into(),
            value: listed(&declared.formats),
        },
    ]
}

/// The declared ε as the Differential Privacy Score; never estimated.
pub fn differential_privacy_score(declared: &DeclaredPrivacy) -> MetricResult {
    let r = match declared.epsilon {
        Some(e) => MetricResult::new(Metric::DifferentialPrivacyScore, e),
        None => MetricResult::undefined(Metric::DifferentialPrivacyScore, NOT_DECLARED),
    };
    r.with_note("declared, not verified")
}
