use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::descriptor::{Criterion, Metric};

/// Rounds to 9 significant digits, the precision reports are written at.
pub fn round9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

/// Raw value of a metric.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Finite(f64),
    /// e.g. PSNR of identical images, or an F statistic with zero
    /// within-group variance.
    PosInfinity,
    Undefined(String),
}

impl MetricValue {
    pub fn undefined(reason: impl Into<String>) -> Self {
        MetricValue::Undefined(reason.into())
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            MetricValue::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        !matches!(self, MetricValue::Undefined(_))
    }

    /// Finite values as-is, `+inf` for the sentinel, `None` when undefined.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            MetricValue::Finite(v) => Some(*v),
            MetricValue::PosInfinity => Some(f64::INFINITY),
            MetricValue::Undefined(_) => None,
        }
    }
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        if v.is_nan() {
            MetricValue::undefined("not a number")
        } else if v == f64::INFINITY {
            MetricValue::PosInfinity
        } else {
            MetricValue::Finite(v)
        }
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Finite(v) => write!(f, "{}", round9(*v)),
            MetricValue::PosInfinity => f.write_str("+inf"),
            MetricValue::Undefined(r) => write!(f, "undefined ({r})"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Number(f64),
    Text(String),
    Undefined { undefined: String },
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricValue::Finite(v) => ValueRepr::Number(round9(*v)),
            MetricValue::PosInfinity => ValueRepr::Text("inf".into()),
            MetricValue::Undefined(r) => ValueRepr::Undefined { undefined: r.clone() },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match ValueRepr::deserialize(d)? {
            ValueRepr::Number(v) => Ok(MetricValue::Finite(v)),
            ValueRepr::Text(t) if t == "inf" => Ok(MetricValue::PosInfinity),
            ValueRepr::Text(t) => Err(serde::de::Error::custom(format!("bad metric value `{t}`"))),
            ValueRepr::Undefined { undefined } => Ok(MetricValue::Undefined(undefined)),
        }
    }
}

pub(crate) mod num_map {
    use super::*;

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<&String, MetricValue> =
            map.iter().map(|(k, v)| (k, MetricValue::from(*v))).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let m = BTreeMap::<String, MetricValue>::deserialize(d)?;
        Ok(m.into_iter()
            .map(|(k, v)| (k, v.as_f64().unwrap_or(f64::NAN)))
            .collect())
    }
}

pub(crate) mod opt_num {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(round9).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

/// Where a result was computed: the whole dataset, a tagged region, or a
/// subgroup.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Global,
    Region(String),
    Subgroup(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Region(r) => write!(f, "region:{r}"),
            Scope::Subgroup(s) => write!(f, "subgroup:{s}"),
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "global" {
            Ok(Scope::Global)
        } else if let Some(r) = s.strip_prefix("region:") {
            Ok(Scope::Region(r.to_string()))
        } else if let Some(g) = s.strip_prefix("subgroup:") {
            Ok(Scope::Subgroup(g.to_string()))
        } else {
            Err(serde::de::Error::custom(format!("bad scope `{s}`")))
        }
    }
}

/// One computed metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricResult {
    pub metric: Metric,
    /// Base metric a consistency summary was computed over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Metric>,
    pub scope: Scope,
    pub value: MetricValue,
    #[serde(default, with = "opt_num", skip_serializing_if = "Option::is_none")]
    pub normalized: Option<f64>,
    #[serde(default, with = "num_map", skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricResult {
    pub fn new(metric: Metric, value: impl Into<MetricValue>) -> Self {
        Self {
            metric,
            target: None,
            scope: Scope::Global,
            value: value.into(),
            normalized: None,
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn undefined(metric: Metric, reason: impl Into<String>) -> Self {
        Self::new(metric, MetricValue::undefined(reason))
    }

    pub fn with_diag(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_target(mut self, target: Metric) -> Self {
        self.target = Some(target);
        self
    }

    pub fn criterion(&self) -> Criterion {
        self.metric.criterion()
    }

    /// Key identifying the result within a scope.
    pub fn key(&self) -> String {
        match self.target {
            Some(t) => format!("{}[{}]", self.metric, t),
            None => self.metric.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Good,
    Moderate,
    Low,
    NotEvaluated,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Good => "good",
            Verdict::Moderate => "moderate",
            Verdict::Low => "low",
            Verdict::NotEvaluated => "not evaluated",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Verdict cut-offs on the 0–100 scale: `score >= good` is good,
/// `moderate <= score < good` is moderate, anything lower is low.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub good: f64,
    pub moderate: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            good: 80.0,
            moderate: 70.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exclusion {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    #[serde(with = "opt_num")]
    pub score: Option<f64>,
    pub verdict: Verdict,
    pub included: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScopeReport {
    pub scope: Scope,
    pub results: Vec<MetricResult>,
    pub criteria: Vec<CriterionSummary>,
}

impl ScopeReport {
    pub fn criterion(&self, c: Criterion) -> Option<&CriterionSummary> {
        self.criteria.iter().find(|s| s.criterion == c)
    }

    pub fn result(&self, metric: Metric) -> Option<&MetricResult> {
        self.results.iter().find(|r| r.metric == metric && r.target.is_none())
    }

    /// A consistency result computed over `base`.
    pub fn targeted(&self, metric: Metric, base: Metric) -> Option<&MetricResult> {
        self.results.iter().find(|r| r.metric == metric && r.target == Some(base))
    }
}

/// A labelled entry passed through onto the card as declared by the data
/// producer (never verified by this crate).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredEntry {
    pub field: String,
    pub value: String,
}

/// Full evaluation output: every raw value, every normalized value, and the
/// per-criterion aggregates for each scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityReport {
    pub format_version: u32,
    pub config_digest: String,
    pub seeds: BTreeMap<String, u64>,
    pub thresholds: Thresholds,
    pub aggregation: AggregationMode,
    #[serde(with = "num_map")]
    pub inputs: BTreeMap<String, f64>,
    pub global: ScopeReport,
    #[serde(default)]
    pub regions: Vec<ScopeReport>,
    #[serde(default)]
    pub subgroups: Vec<ScopeReport>,
    #[serde(default)]
    pub declared_privacy: Vec<DeclaredEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// SHA-256 over the serialized report with this field empty.
    #[serde(default)]
    pub digest: String,
}

impl QualityReport {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn scopes(&self) -> impl Iterator<Item = &ScopeReport> {
        std::iter::once(&self.global)
            .chain(&self.regions)
            .chain(&self.subgroups)
    }

    pub fn compute_digest(&self) -> String {
        let mut unsealed = self.clone();
        unsealed.digest.clear();
        let bytes = serde_json::to_vec(&unsealed).expect("report serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn seal(&mut self) {
        self.digest = self.compute_digest();
    }

    pub fn is_intact(&self) -> bool {
        !self.digest.is_empty() && self.digest == self.compute_digest()
    }
}
