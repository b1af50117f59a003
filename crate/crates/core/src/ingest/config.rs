//! Evaluation plan: which metrics to run, with what parameters, bounds,
//! weights and thresholds. Parsed strictly from TOML: unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compliance::DeclaredPrivacy;
use crate::congruence::EmdMode;
use crate::constraint::{ConstraintRuleSet, RuleSpec};
use crate::coverage::Kernel;
use crate::error::{Error, Result};
use crate::model::{AggregationMode, ColumnKind, Criterion, Metric, Thresholds};

use super::data::TableSchema;

/// Environment variable that replaces the built-in default seed when the
/// config does not set one.
pub const SEED_ENV: &str = "SMDCARD_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Per-metric tuning knobs. Each metric accepts only the keys that apply to
/// it; see [`MetricParams::allowed`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<EmdMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduce_to: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl MetricParams {
    fn set_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if self.k.is_some() {
            keys.push("k");
        }
        if self.bins.is_some() {
            keys.push("bins");
        }
        if self.mode.is_some() {
            keys.push("mode");
        }
        if self.reduce_to.is_some() {
            keys.push("reduce_to");
        }
        if self.kernel.is_some() {
            keys.push("kernel");
        }
        if self.gamma.is_some() {
            keys.push("gamma");
        }
        if self.ridge.is_some() {
            keys.push("ridge");
        }
        if self.k_clusters.is_some() {
            keys.push("k_clusters");
        }
        if self.tau.is_some() {
            keys.push("tau");
        }
        keys
    }

    pub fn allowed(metric: Metric) -> &'static [&'static str] {
        match metric {
            Metric::EarthMoversDistance => &["mode"],
            Metric::JensenShannonDivergence | Metric::Entropy => &["bins"],
            Metric::Precision | Metric::Recall | Metric::Coverage | Metric::RarityScore => &["k"],
            Metric::ConvexHullVolume => &["reduce_to"],
            Metric::VendiScore => &["kernel", "gamma"],
            Metric::DppScore => &["kernel", "gamma", "ridge"],
            Metric::ClusteringBalance => &["k_clusters"],
            Metric::LeakageRate => &["tau"],
            _ => &[],
        }
    }

    fn check(&self, metric: Metric) -> Result<()> {
        let allowed = Self::allowed(metric);
        if let Some(bad) = self.set_keys().into_iter().find(|k| !allowed.contains(k)) {
            return Err(Error::Config(format!(
                "parameter `{bad}` does not apply to {metric} (allowed: {allowed:?})"
            )));
        }
        if self.k == Some(0) || self.bins == Some(0) || self.reduce_to == Some(0) {
            return Err(Error::Config(format!("{metric}: parameters must be positive")));
        }
        if self.k_clusters.is_some_and(|k| k < 2) {
            return Err(Error::Config(format!("{metric}: k_clusters must be at least 2")));
        }
        if self.reduce_to.is_some_and(|r| !(2..=3).contains(&r)) {
            return Err(Error::Config(format!("{metric}: reduce_to must be 2 or 3")));
        }
        for (name, v) in [("gamma", self.gamma), ("ridge", self.ridge), ("tau", self.tau)] {
            if v.is_some_and(|v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::Config(format!("{metric}: {name} must be a nonnegative number")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_column: Option<String>,
    /// Real record table, used to derive constraint ranges and the required
    /// field list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_table: Option<String>,
    /// n×c class-probability matrix for the Inception-style score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probs: Option<String>,
    /// Card manifest; when set, the documentation clarity score is computed
    /// during evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub table_schema: BTreeMap<String, ColumnKind>,
    #[serde(default)]
    pub missing_sentinel: String,
}

fn default_id_column() -> String {
    "id".into()
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            id_column: default_id_column(),
            subgroup_column: None,
            region_column: None,
            reference_table: None,
            class_probs: None,
            manifest: None,
            table_schema: BTreeMap::new(),
            missing_sentinel: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveConfig {
    pub fields: Vec<String>,
    #[serde(default)]
    pub quantile_margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<DeriveConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletenessConfig {
    /// Required fields; empty means "the reference table's columns".
    #[serde(default)]
    pub required: Vec<String>,
    /// Fraction of rows that must be populated for a field to count as present.
    #[serde(default = "one")]
    pub populated_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for CompletenessConfig {
    fn default() -> Self {
        Self {
            required: Vec::new(),
            populated_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceConfig {
    #[serde(default)]
    pub quasi_identifiers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive_column: Option<String>,
    #[serde(default)]
    pub declared: DeclaredPrivacy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyConfig {
    /// Metrics re-evaluated per subgroup; default: every selected metric that
    /// can be restricted to a subgroup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_metrics: Option<Vec<String>>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            base_metrics: None,
            bootstrap: DEFAULT_BOOTSTRAP,
        }
    }
}

/// On-disk shape of the config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    metrics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default)]
    aggregation: AggregationMode,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    weights: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds_file: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: BTreeMap<String, MetricParams>,
    /// Optional global PCA reduction applied to embeddings before any metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pca_dim: Option<usize>,
    #[serde(default)]
    data: DataConfig,
    #[serde(default)]
    constraints: ConstraintConfig,
    #[serde(default)]
    completeness: CompletenessConfig,
    #[serde(default)]
    compliance: ComplianceConfig,
    #[serde(default)]
    consistency: ConsistencyConfig,
}

/// Suggested normalization bounds as written by `smdcard calibrate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observed: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub source: BTreeMap<String, String>,
}

/// Validated evaluation plan.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub metrics: Vec<Metric>,
    pub seed: u64,
    pub aggregation: AggregationMode,
    pub thresholds: Thresholds,
    /// Per-metric weights within a criterion (default 1).
    pub weights: BTreeMap<Metric, f64>,
    /// Normalization bounds from the config (and its bounds file).
    pub bounds: BTreeMap<Metric, (f64, f64)>,
    pub params: BTreeMap<Metric, MetricParams>,
    pub pca_dim: Option<usize>,
    pub data: DataConfig,
    pub constraint_rules: ConstraintRuleSet,
    pub derive: Option<DeriveConfig>,
    pub completeness: CompletenessConfig,
    pub compliance: ComplianceConfig,
    pub consistency_base: Option<Vec<Metric>>,
    pub bootstrap: usize,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    digest: String,
}

fn parse_metric_keyed<T: Clone>(map: &BTreeMap<String, T>) -> Result<BTreeMap<Metric, T>> {
    map.iter()
        .map(|(k, v)| Ok((k.parse::<Metric>()?, v.clone())))
        .collect()
}

fn check_bounds(map: &BTreeMap<String, [f64; 2]>) -> Result<BTreeMap<Metric, (f64, f64)>> {
    map.iter()
        .map(|(k, [lo, hi])| {
            let m: Metric = k.parse()?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("bounds for {m} must satisfy lo < hi")));
            }
            Ok((m, (*lo, *hi)))
        })
        .collect()
}

impl EvalConfig {
    /// Default plan for the given metrics; everything else at defaults.
    pub fn for_metrics(metrics: &[Metric]) -> Self {
        let names: Vec<String> = metrics.iter().map(|m| m.to_string()).collect();
        let text = toml::to_string(&toml::Table::from_iter([(
            "metrics".to_string(),
            toml::Value::Array(names.into_iter().map(toml::Value::String).collect()),
        )]))
        .expect("serializable");
        Self::from_toml_str(&text, Path::new(".")).expect("default plan is valid")
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::from_raw(raw, base_dir)
    }

    fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self> {
        let mut metrics = Vec::with_capacity(raw.metrics.len());
        for name in &raw.metrics {
            let m: Metric = name.parse()?;
            if metrics.contains(&m) {
                return Err(Error::Config(format!("metric {m} selected twice")));
            }
            metrics.push(m);
        }
        if metrics.is_empty() {
            return Err(Error::Config("no metrics selected".into()));
        }
        let t = raw.thresholds;
        if !(t.good.is_finite() && t.moderate.is_finite() && t.moderate < t.good) {
            return Err(Error::Config(format!(
                "thresholds not ordered: need moderate < good, got moderate={} good={}",
                t.moderate, t.good
            )));
        }
        if t.moderate < 0.0 || t.good > 100.0 {
            return Err(Error::Config("thresholds must lie within [0, 100]".into()));
        }

        let weights = parse_metric_keyed(&raw.weights)?;
        if let Some((m, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Config(format!("weight for {m} must be nonnegative, got {w}")));
        }
        for c in Criterion::ALL {
            let selected: Vec<&Metric> = metrics.iter().filter(|m| m.criterion() == c).collect();
            if !selected.is_empty()
                && selected.iter().all(|m| weights.get(*m).copied().unwrap_or(1.0) == 0.0)
            {
                return Err(Error::Config(format!("every {c} metric has zero weight")));
            }
        }

        let mut bounds = BTreeMap::new();
        if let Some(file) = &raw.bounds_file {
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let bf: BoundsFile = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
            bounds.extend(check_bounds(&bf.bounds)?);
        }
        bounds.extend(check_bounds(&raw.bounds)?);

        let params = parse_metric_keyed(&raw.params)?;
        for (m, p) in &params {
            p.check(*m)?;
        }
        if raw.pca_dim == Some(0) {
            return Err(Error::Config("pca_dim must be positive".into()));
        }

        let constraint_rules = ConstraintRuleSet::from_specs(&raw.constraints.rules)?;
        if let Some(d) = &raw.constraints.derive {
            if !(0.0..0.5).contains(&d.quantile_margin) {
                return Err(Error::Config("quantile_margin must be in [0, 0.5)".into()));
            }
            if d.fields.is_empty() {
                return Err(Error::Config("constraints.derive.fields is empty".into()));
            }
        }
        let pf = raw.completeness.populated_fraction;
        if !(0.0..=1.0).contains(&pf) {
            return Err(Error::Config("populated_fraction must be in [0, 1]".into()));
        }
        let consistency_base = raw
            .consistency
            .base_metrics
            .as_ref()
            .map(|names| names.iter().map(|n| n.parse()).collect::<Result<Vec<Metric>>>())
            .transpose()?;
        if let Some(bad) = consistency_base.iter().flatten().find(|m| m.is_consistency()) {
            return Err(Error::Config(format!("{bad} cannot be a consistency base metric")));
        }
        if raw.consistency.bootstrap < 2 {
            return Err(Error::Config("consistency.bootstrap must be at least 2".into()));
        }

        let seed = match raw.seed {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?,
                Err(_) => DEFAULT_SEED,
            },
        };

        // Digest over the canonical re-serialization with the resolved seed.
        let mut canonical = raw.clone();
        canonical.seed = Some(seed);
        let json = serde_json::to_vec(&canonical).map_err(|e| Error::Serde(e.to_string()))?;
        let digest = hex::encode(Sha256::digest(&json));

        Ok(Self {
            metrics,
            seed,
            aggregation: raw.aggregation,
            thresholds: t,
            weights,
            bounds,
            params,
            pca_dim: raw.pca_dim,
            data: raw.data,
            constraint_rules,
            derive: raw.constraints.derive,
            completeness: raw.completeness,
            compliance: raw.compliance,
            consistency_base,
            bootstrap: raw.consistency.bootstrap,
            base_dir: base_dir.to_path_buf(),
            digest,
        })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn params(&self, m: Metric) -> MetricParams {
        self.params.get(&m).cloned().unwrap_or_default()
    }

    pub fn weight(&self, m: Metric) -> f64 {
        self.weights.get(&m).copied().unwrap_or(1.0)
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn table_schema(&self) -> TableSchema {
        TableSchema {
            kinds: self.data.table_schema.clone(),
            missing_sentinel: self.data.missing_sentinel.clone(),
        }
    }

    pub fn selects(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    /// Selected metrics that are recomputed per subgroup.
    pub fn consistency_bases(&self) -> Vec<Metric> {
        match &self.consistency_base {
            Some(b) => b.clone(),
            None => self
                .metrics
                .iter()
                .copied()
                .filter(|m| !m.is_consistency() && (m.uses_embeddings() || m.uses_table()))
                .collect(),
        }
    }

    pub fn wants_consistency(&self) -> bool {
        self.metrics.iter().any(|m| m.is_consistency())
    }
}

pub fn read_eval_config(path: &Path) -> Result<EvalConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    EvalConfig::from_toml_str(&text, base).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
