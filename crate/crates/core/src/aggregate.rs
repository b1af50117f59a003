//! Normalization of raw metric values onto 0..100, per-criterion aggregation
//! and verdicts.

use std::collections::BTreeMap;

use crate::ingest::EvalConfig;
use crate::model::{
    AggregationMode, Criterion, CriterionSummary, DeclaredEntry, Direction, Exclusion, Metric, MetricResult,
    MetricValue, QualityReport, Scope, ScopeReport, Thresholds, Verdict,
};

/// Floor applied before taking logs in geometric mode.
pub const GEOMETRIC_FLOOR: f64 = 0.01;

/// Upper bound for SubgroupVariance: the largest population variance of
/// values confined to [0, 100].
pub const SUBGROUP_VARIANCE_MAX: f64 = 2500.0;

/// Where a metric's normalization bounds come from when the config gives none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefaultBounds {
    Fixed(f64, f64),
    /// `[lo, diagnostics[key]]`, known only after computing.
    UpperFromDiagnostic { lo: f64, key: &'static str },
    /// Unbounded metric: the config (or a calibration run) must supply bounds.
    Required,
    /// Normalized without bounds (statistical significance).
    PValue,
    /// Reported, never aggregated.
    NotAggregated(&'static str),
}

pub fn default_bounds(metric: Metric) -> DefaultBounds {
    use DefaultBounds::*;
    match metric {
        Metric::CosineSimilarity | Metric::StructuralSimilarityIndex => Fixed(-1.0, 1.0),
        Metric::JensenShannonDivergence
        | Metric::Precision
        | Metric::Recall
        | Metric::Coverage
        | Metric::ClusteringBalance
        | Metric::ConstraintViolationRate
        | Metric::RequiredFieldProportion
        | Metric::MissingDataPercentage
        | Metric::TCloseness
        | Metric::LeakageRate => Fixed(0.0, 1.0),
        Metric::DocumentationClarityScore => Fixed(1.0, 10.0),
        Metric::SubgroupVariance => Fixed(0.0, SUBGROUP_VARIANCE_MAX),
        Metric::MaxMinDifference => Fixed(0.0, 100.0),
        Metric::VendiScore => UpperFromDiagnostic { lo: 1.0, key: "n" },
        Metric::InceptionScore => UpperFromDiagnostic { lo: 1.0, key: "classes" },
        Metric::KAnonymity => UpperFromDiagnostic { lo: 1.0, key: "rows" },
        Metric::LDiversity => UpperFromDiagnostic {
            lo: 1.0,
            key: "distinct_sensitive",
        },
        Metric::AnalysisOfVariance => PValue,
        Metric::DifferentialPrivacyScore => NotAggregated("declared, not verified"),
        Metric::EarthMoversDistance
        | Metric::PeakSignalToNoiseRatio
        | Metric::FrechetDistance
        | Metric::CentroidDistance
        | Metric::CentroidSpread
        | Metric::ConvexHullVolume
        | Metric::DppScore
        | Metric::Variance
        | Metric::Entropy
        | Metric::RarityScore
        | Metric::NearestInvalidDatapoint
        | Metric::DistanceToConstraintBoundary => Required,
    }
}

/// Metrics among `metrics` with neither configured nor default bounds.
pub fn missing_bounds(metrics: &[Metric], configured: &BTreeMap<Metric, (f64, f64)>) -> Vec<Metric> {
    metrics
        .iter()
        .copied()
        .filter(|m| default_bounds(*m) == DefaultBounds::Required && !configured.contains_key(m))
        .collect()
}

/// Maps `v` onto 0..100 by direction; stat-sig values are taken as
/// p-values.
pub fn normalize_value(direction: Direction, v: f64, lo: f64, hi: f64) -> f64 {
    let t = match direction {
        Direction::Maximize => (v - lo) / (hi - lo),
        Direction::Minimize => (hi - v) / (hi - lo),
        Direction::StatSig => v,
    };
    if t.is_nan() {
        0.0
    } else {
        100.0 * t.clamp(0.0, 1.0)
    }
}

/// Normalized score of one result, or the reason it is excluded.
pub fn normalize(result: &MetricResult, configured: Option<(f64, f64)>) -> Result<f64, String> {
    let value = match &result.value {
        MetricValue::Undefined(reason) => return Err(format!("undefined: {reason}")),
        v => v.as_f64().expect("defined"),
    };
    let metric = result.metric;
    let direction = metric.score_direction();
    if direction == Direction::StatSig {
        return match result.diagnostics.get("p_value") {
            Some(p) if p.is_finite() => Ok(normalize_value(direction, *p, 0.0, 1.0)),
            _ => Err("no p-value".into()),
        };
    }
    let (lo, hi) = match (configured, default_bounds(metric)) {
        (Some(b), _) => b,
        (None, DefaultBounds::NotAggregated(why)) => return Err(why.into()),
        (None, DefaultBounds::Fixed(lo, hi)) => (lo, hi),
        (None, DefaultBounds::UpperFromDiagnostic { lo, key }) => match result.diagnostics.get(key) {
            Some(&hi) => (lo, hi),
            None => return Err(format!("no `{key}` diagnostic for default bounds")),
        },
        (None, _) => return Err("no normalization bounds".into()),
    };
    if !(lo < hi) {
        return Err(format!("degenerate bounds [{lo}, {hi}]"));
    }
    if value == f64::INFINITY {
        return Ok(if direction == Direction::Maximize { 100.0 } else { 0.0 });
    }
    Ok(normalize_value(direction, value, lo, hi))
}

/// Weighted mean of `(score, weight)` pairs; `None` when no weight is
/// positive.
pub fn aggregate_criterion(values: &[(f64, f64)], mode: AggregationMode) -> Option<f64> {
    let total: f64 = values.iter().map(|(_, w)| w).sum();
    if values.is_empty() || !(total > 0.0) {
        return None;
    }
    let score = match mode {
        AggregationMode::Arithmetic => values.iter().map(|(v, w)| v * w).sum::<f64>() / total,
        AggregationMode::Geometric => {
            (values.iter().map(|(v, w)| w * v.max(GEOMETRIC_FLOOR).ln()).sum::<f64>() / total).exp()
        }
    };
    Some(score.clamp(0.0, 100.0))
}

pub fn verdict(score: f64, t: Thresholds) -> Verdict {
    if score >= t.good {
        Verdict::Good
    } else if score >= t.moderate {
        Verdict::Moderate
    } else {
        Verdict::Low
    }
}

/// Normalizes `results` in place and summarizes every criterion.
pub fn summarize_scope(scope: Scope, mut results: Vec<MetricResult>, config: &EvalConfig) -> ScopeReport {
    let mut per_criterion: BTreeMap<Criterion, (Vec<(f64, f64)>, Vec<String>, Vec<Exclusion>)> = BTreeMap::new();
    for r in &mut results {
        let entry = per_criterion.entry(r.criterion()).or_default();
        match normalize(r, config.bounds.get(&r.metric).copied()) {
            Ok(n) => {
                r.normalized = Some(n);
                entry.0.push((n, config.weight(r.metric)));
                entry.1.push(r.key());
            }
            Err(reason) => {
                r.normalized = None;
                entry.2.push(Exclusion { metric: r.key(), reason });
            }
        }
    }
    let criteria = Criterion::ALL
        .iter()
        .map(|&c| {
            let (values, included, excluded) = per_criterion.remove(&c).unwrap_or_default();
            let score = aggregate_criterion(&values, config.aggregation);
            CriterionSummary {
                criterion: c,
                score,
                verdict: score.map_or(Verdict::NotEvaluated, |s| verdict(s, config.thresholds)),
                included,
                excluded,
            }
        })
        .collect();
    ScopeReport {
        scope,
        results,
        criteria,
    }
}

pub struct ReportParts {
    pub global: ScopeReport,
    pub regions: Vec<ScopeReport>,
    pub subgroups: Vec<ScopeReport>,
    pub inputs: BTreeMap<String, f64>,
    pub seeds: BTreeMap<String, u64>,
    pub declared_privacy: Vec<DeclaredEntry>,
    pub notes: Vec<String>,
}

/// Seals the scope reports into a digest-carrying report.
pub fn assemble_report(parts: ReportParts, config: &EvalConfig) -> QualityReport {
    let mut report = QualityReport {
        format_version: QualityReport::FORMAT_VERSION,
        config_digest: config.digest().to_string(),
        seeds: parts.seeds,
        thresholds: config.thresholds,
        aggregation: config.aggregation,
        inputs: parts.inputs,
        global: parts.global,
        regions: parts.regions,
        subgroups: parts.subgroups,
        declared_privacy: parts.declared_privacy,
        notes: parts.notes,
        digest: String::new(),
    };
    report.seal();
    report
}

/// A report with no results, for cards built without an evaluation.
pub fn empty_report(thresholds: Thresholds) -> QualityReport {
    QualityReport {
        format_version: QualityReport::FORMAT_VERSION,
        config_digest: String::new(),
        seeds: BTreeMap::new(),
        thresholds,
        aggregation: AggregationMode::Arithmetic,
        inputs: BTreeMap::new(),
        global: ScopeReport {
            scope: Scope::Global,
            results: Vec::new(),
            criteria: Vec::new(),
        },
        regions: Vec::new(),
        subgroups: Vec::new(),
        declared_privacy: Vec::new(),
        notes: Vec::new(),
        digest: String::new(),
    }
}
