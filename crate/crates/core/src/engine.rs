//! Evaluation pipeline: plan checks, metric dispatch per scope, consistency,
//! aggregation into a sealed report, and reference-run calibration.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aggregate::{self, default_bounds, missing_bounds, DefaultBounds, ReportParts};
use crate::card::{documentation_clarity_result, read_manifest, Manifest};
use crate::compliance;
use crate::congruence::{self, ImagePair};
use crate::consistency::{self, fnv1a};
use crate::constraint::{self, derive_range_rules, ConstraintRuleSet, RuleSource};
use crate::coverage::{self, DEFAULT_DPP_RIDGE};
use crate::completeness;
use crate::error::{Error, Result};
use crate::ingest::{load_image_pairs, read_embeddings, read_record_table, BoundsFile, EmbeddingColumns, EvalConfig};
use crate::linalg::Pca;
use crate::model::{distinct_labels, Criterion, Direction, EmbeddingSet, Metric, MetricResult, QualityReport, RecordTable, Scope};
use crate::validate::{validate_inputs, ValidationOutcome};

pub const DEFAULT_K_PRECISION: usize = 3;
pub const DEFAULT_K_COVERAGE: usize = 5;
pub const DEFAULT_REDUCE_TO: usize = 3;
pub const CALIBRATION_SPLITS: usize = 10;

const GLOBAL_ONLY: &str = "computed at global scope only";

/// Everything an evaluation reads.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub real: Option<EmbeddingSet>,
    pub synthetic: EmbeddingSet,
    /// Synthetic record table.
    pub table: Option<RecordTable>,
    pub reference_table: Option<RecordTable>,
    pub class_probs: Option<EmbeddingSet>,
    pub images: Vec<ImagePair>,
    pub manifest: Option<Manifest>,
}

impl Inputs {
    pub fn new(synthetic: EmbeddingSet) -> Self {
        Self {
            real: None,
            synthetic,
            table: None,
            reference_table: None,
            class_probs: None,
            images: Vec::new(),
            manifest: None,
        }
    }

    pub fn with_real(mut self, real: EmbeddingSet) -> Self {
        self.real = Some(real);
        self
    }

    pub fn with_table(mut self, table: RecordTable) -> Self {
        self.table = Some(table);
        self
    }
}

/// Input file locations given on the command line.
#[derive(Debug, Clone, Copy)]
pub struct InputPaths<'a> {
    pub real: Option<&'a Path>,
    pub synthetic: &'a Path,
    pub table: Option<&'a Path>,
    pub images: Option<&'a Path>,
}

fn embedding_columns(config: &EvalConfig) -> EmbeddingColumns<'_> {
    EmbeddingColumns {
        id: &config.data.id_column,
        subgroup: config.data.subgroup_column.as_deref(),
        region: config.data.region_column.as_deref(),
    }
}

/// Reads the command-line inputs plus the files the config points at.
pub fn load_inputs(config: &EvalConfig, paths: InputPaths<'_>) -> Result<Inputs> {
    let cols = embedding_columns(config);
    let schema = config.table_schema();
    let real = paths.real.map(|p| read_embeddings(p, &cols)).transpose()?;
    let synthetic = read_embeddings(paths.synthetic, &cols)?;
    let table = paths.table.map(|p| read_record_table(p, &schema)).transpose()?;
    let data = &config.data;
    let reference_table = data
        .reference_table
        .as_ref()
        .map(|p| read_record_table(&config.resolve(p), &schema))
        .transpose()?;
    let class_probs = data
        .class_probs
        .as_ref()
        .map(|p| read_embeddings(&config.resolve(p), &EmbeddingColumns::default()))
        .transpose()?;
    let manifest = data.manifest.as_ref().map(|p| read_manifest(&config.resolve(p))).transpose()?;
    let images = paths.images.map(load_image_pairs).transpose()?.unwrap_or_default();
    Ok(Inputs {
        real,
        synthetic,
        table,
        reference_table,
        class_probs,
        images,
        manifest,
    })
}

/// A checked evaluation plan: the config plus the rule set and required
/// field list resolved against the inputs.
#[derive(Debug, Clone)]
pub struct Plan<'a> {
    pub config: &'a EvalConfig,
    pub rules: ConstraintRuleSet,
    pub required: Vec<String>,
    /// Metrics recomputed per subgroup for the consistency criterion.
    pub bases: Vec<Metric>,
}

fn table_metric_needs(metric: Metric) -> bool {
    metric.uses_table()
}

impl<'a> Plan<'a> {
    /// Resolves the plan and collects every problem found.
    pub fn build(inputs: &Inputs, config: &'a EvalConfig) -> (Self, ValidationOutcome) {
        let mut out = validate_inputs(inputs.real.as_ref(), &inputs.synthetic, config);
        let bases = if config.wants_consistency() {
            config.consistency_bases()
        } else {
            Vec::new()
        };
        let mut in_play: Vec<Metric> = config.metrics.iter().copied().filter(|m| !m.is_consistency()).collect();
        for b in &bases {
            if !in_play.contains(b) {
                in_play.push(*b);
            }
        }
        for b in &bases {
            if !(b.uses_embeddings() || b.uses_table()) {
                out.push(format!("{b} cannot be recomputed per subgroup"));
            }
        }

        if inputs.table.is_none() {
            for m in in_play.iter().filter(|m| table_metric_needs(**m)) {
                out.push(format!("{m} requires a record table (--table)"));
            }
        }
        for m in [Metric::PeakSignalToNoiseRatio, Metric::StructuralSimilarityIndex] {
            if in_play.contains(&m) && inputs.images.is_empty() {
                out.push(format!("{m} requires paired images (--images)"));
            }
        }
        if in_play.contains(&Metric::InceptionScore) && inputs.class_probs.is_none() {
            out.push("InceptionScore requires class probabilities (data.class_probs)");
        }
        if in_play.contains(&Metric::DocumentationClarityScore) && inputs.manifest.is_none() {
            out.push("DocumentationClarityScore requires a card manifest (data.manifest)");
        }

        let mut rules = config.constraint_rules.clone();
        if let Some(d) = &config.derive {
            match &inputs.reference_table {
                None => out.push("constraints.derive requires a reference table (data.reference_table)"),
                Some(reference) => match derive_range_rules(reference, &d.fields, d.quantile_margin)
                    .and_then(|derived| rules.extend(derived))
                {
                    Ok(()) => {}
                    Err(e) => out.push(e.to_string()),
                },
            }
            if config.constraint_rules.is_empty() {
                rules.source = RuleSource::DerivedFromReference;
            }
        }
        let constraint_metrics = [
            Metric::NearestInvalidDatapoint,
            Metric::DistanceToConstraintBoundary,
            Metric::ConstraintViolationRate,
        ];
        if in_play.iter().any(|m| constraint_metrics.contains(m)) {
            if rules.is_empty() {
                out.push("constraint metrics require rules ([[constraints.rules]] or constraints.derive)");
            } else if let Some(t) = &inputs.table {
                if let Err(e) = rules.check_fields(t) {
                    out.push(e.to_string());
                }
            }
        }

        let required = if !config.completeness.required.is_empty() {
            config.completeness.required.clone()
        } else {
            inputs
                .reference_table
                .as_ref()
                .map(|t| t.columns().iter().map(|c| c.name.clone()).collect())
                .unwrap_or_default()
        };
        if in_play.contains(&Metric::RequiredFieldProportion) && required.is_empty() {
            out.push("RequiredFieldProportion requires completeness.required or a reference table");
        }

        let c = &config.compliance;
        let privacy = [Metric::KAnonymity, Metric::LDiversity, Metric::TCloseness];
        if in_play.iter().any(|m| privacy.contains(m)) {
            if c.quasi_identifiers.is_empty() {
                out.push("privacy metrics require compliance.quasi_identifiers");
            }
            if let Some(t) = &inputs.table {
                for q in c.quasi_identifiers.iter().chain(&c.sensitive_column) {
                    if t.column_index(q).is_none() {
                        out.push(format!("unknown field `{q}` in the record table"));
                    }
                }
            }
        }
        for m in [Metric::LDiversity, Metric::TCloseness] {
            if in_play.contains(&m) && c.sensitive_column.is_none() {
                out.push(format!("{m} requires compliance.sensitive_column"));
            }
        }

        if config.wants_consistency() && config.data.subgroup_column.is_none() {
            out.push("consistency metrics require data.subgroup_column");
        }
        for m in missing_bounds(&in_play, &config.bounds) {
            out.push(format!(
                "no normalization bounds for {m}; set [bounds] or run calibrate"
            ));
        }

        (
            Self {
                config,
                rules,
                required,
                bases,
            },
            out,
        )
    }

    /// The plan, or every violation as one validation error.
    pub fn check(inputs: &Inputs, config: &'a EvalConfig) -> Result<Self> {
        let (plan, outcome) = Self::build(inputs, config);
        if outcome.is_ok() {
            Ok(plan)
        } else {
            Err(Error::Validation(outcome.violations))
        }
    }

    /// Table rows in subgroup `label`, when the table carries the subgroup
    /// column.
    pub fn table_subgroup_rows(&self, inputs: &Inputs, label: &str) -> Option<Vec<usize>> {
        let col = self.config.data.subgroup_column.as_deref()?;
        inputs.table.as_ref()?.rows_where(col, label).ok()
    }
}

/// An input, or the reason it is unavailable in the current scope.
pub type Part<T> = std::result::Result<T, String>;

/// The data a metric sees in one scope.
#[derive(Debug, Clone)]
pub struct View {
    pub real: Part<EmbeddingSet>,
    pub synthetic: EmbeddingSet,
    pub table: Part<RecordTable>,
}

#[derive(Clone, Copy)]
enum Axis {
    Subgroup,
    Region,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Subgroup => "subgroup",
            Axis::Region => "region",
        }
    }

    fn indices(self, set: &EmbeddingSet, label: &str) -> Option<Vec<usize>> {
        match self {
            Axis::Subgroup => set.subgroups().map(|_| set.subgroup_indices(label)),
            Axis::Region => set.regions().map(|_| set.region_indices(label)),
        }
    }
}

impl View {
    pub fn global(inputs: &Inputs) -> Self {
        Self {
            real: inputs.real.clone().ok_or_else(|| "no reference set".to_string()),
            synthetic: inputs.synthetic.clone(),
            table: inputs.table.clone().ok_or_else(|| "no record table".to_string()),
        }
    }

    fn restrict(inputs: &Inputs, column: Option<&str>, axis: Axis, label: &str) -> Self {
        let kind = axis.name();
        let column = column.unwrap_or(kind);
        let synthetic = inputs
            .synthetic
            .select(&axis.indices(&inputs.synthetic, label).unwrap_or_default());
        let real = match &inputs.real {
            None => Err("no reference set".to_string()),
            Some(r) => match axis.indices(r, label) {
                None => Err(format!("reference set has no `{column}` column")),
                Some(idx) if idx.is_empty() => Err(format!("no reference rows in {kind} `{label}`")),
                Some(idx) => Ok(r.select(&idx)),
            },
        };
        let table = match &inputs.table {
            None => Err("no record table".to_string()),
            Some(t) => match t.rows_where(column, label) {
                Err(_) => Err(format!("record table has no `{column}` column")),
                Ok(idx) if idx.is_empty() => Err(format!("no table rows in {kind} `{label}`")),
                Ok(idx) => Ok(t.select_rows(&idx)),
            },
        };
        Self { real, synthetic, table }
    }

    pub fn subgroup(inputs: &Inputs, plan: &Plan<'_>, label: &str) -> Self {
        Self::restrict(inputs, plan.config.data.subgroup_column.as_deref(), Axis::Subgroup, label)
    }

    pub fn region(inputs: &Inputs, plan: &Plan<'_>, label: &str) -> Self {
        Self::restrict(inputs, plan.config.data.region_column.as_deref(), Axis::Region, label)
    }

    /// Same scope with synthetic rows (and table rows) replaced by the given
    /// indices into the full inputs.
    pub fn resampled(&self, inputs: &Inputs, synthetic_rows: &[usize], table_rows: Option<Vec<usize>>) -> Self {
        let table = match (table_rows, &inputs.table) {
            (Some(idx), Some(t)) if !idx.is_empty() => Ok(t.select_rows(&idx)),
            _ => self.table.clone(),
        };
        Self {
            real: self.real.clone(),
            synthetic: inputs.synthetic.select(synthetic_rows),
            table,
        }
    }
}

fn local_error_is_data(e: &Error) -> bool {
    matches!(
        e,
        Error::Precondition(_) | Error::KOutOfRange { .. } | Error::DimensionMismatch { .. } | Error::InvalidData(_)
    )
}

/// Computes one non-consistency metric in a scope. In local scopes failed
/// preconditions become undefined markers; at global scope they are errors.
pub fn compute_metric(metric: Metric, view: &View, inputs: &Inputs, plan: &Plan<'_>, global: bool) -> Result<MetricResult> {
    match dispatch(metric, view, inputs, plan, global) {
        Ok(r) => Ok(r),
        Err(e) if !global && local_error_is_data(&e) => Ok(MetricResult::undefined(metric, e.to_string())),
        Err(e) => Err(e),
    }
}

fn dispatch(metric: Metric, view: &View, inputs: &Inputs, plan: &Plan<'_>, global: bool) -> Result<MetricResult> {
    macro_rules! need {
        ($part:expr) => {
            match &$part {
                Ok(v) => v,
                Err(reason) => return Ok(MetricResult::undefined(metric, reason.clone())),
            }
        };
    }
    let config = plan.config;
    let p = config.params(metric);
    let syn = &view.synthetic;
    let global_only = matches!(
        metric,
        Metric::PeakSignalToNoiseRatio
            | Metric::StructuralSimilarityIndex
            | Metric::InceptionScore
            | Metric::DifferentialPrivacyScore
            | Metric::DocumentationClarityScore
    ) || metric.is_consistency();
    if global_only && !global {
        return Ok(MetricResult::undefined(metric, GLOBAL_ONLY));
    }
    let compliance_cfg = &config.compliance;
    let sensitive = || {
        compliance_cfg
            .sensitive_column
            .clone()
            .ok_or_else(|| "no sensitive column configured".to_string())
    };
    match metric {
        Metric::CosineSimilarity => congruence::cosine_centroid(need!(view.real), syn),
        Metric::EarthMoversDistance => congruence::wasserstein1(need!(view.real), syn, p.mode.unwrap_or_default()),
        Metric::JensenShannonDivergence => congruence::jensen_shannon(need!(view.real), syn, p.bins),
        Metric::PeakSignalToNoiseRatio => Ok(congruence::psnr(&inputs.images)),
        Metric::StructuralSimilarityIndex => Ok(congruence::ssim(&inputs.images)),
        Metric::FrechetDistance => congruence::frechet_distance(need!(view.real), syn),
        Metric::CentroidDistance => congruence::distance_to_centroid(need!(view.real), syn),
        Metric::Precision => {
            congruence::manifold_precision(need!(view.real), syn, p.k.unwrap_or(DEFAULT_K_PRECISION))
        }
        Metric::InceptionScore => coverage::inception_style_score(need!(inputs
            .class_probs
            .as_ref()
            .ok_or_else(|| "no class probabilities".to_string()))),
        Metric::Recall => coverage::manifold_recall(need!(view.real), syn, p.k.unwrap_or(DEFAULT_K_PRECISION)),
        Metric::Coverage => coverage::manifold_coverage(need!(view.real), syn, p.k.unwrap_or(DEFAULT_K_COVERAGE)),
        Metric::CentroidSpread => coverage::distance_to_centroid_coverage(need!(view.real), syn),
        Metric::ConvexHullVolume => coverage::convex_hull_volume(syn, p.reduce_to.unwrap_or(DEFAULT_REDUCE_TO)),
        Metric::DppScore => Ok(coverage::dpp_logdet(
            syn,
            p.kernel.unwrap_or_default(),
            p.gamma,
            p.ridge.unwrap_or(DEFAULT_DPP_RIDGE),
        )),
        Metric::VendiScore => Ok(coverage::vendi_score(syn, p.kernel.unwrap_or_default(), p.gamma)),
        Metric::Variance => Ok(coverage::total_variance(syn)),
        Metric::Entropy => Ok(coverage::embedding_entropy(syn, p.bins)),
        Metric::RarityScore => coverage::rarity_score(need!(view.real), syn, p.k.unwrap_or(DEFAULT_K_PRECISION)),
        Metric::ClusteringBalance => Ok(coverage::cluster_balance(syn, p.k_clusters, config.seed)),
        Metric::NearestInvalidDatapoint => constraint::margin_to_boundary(need!(view.table), &plan.rules),
        Metric::DistanceToConstraintBoundary => constraint::violation_magnitude(need!(view.table), &plan.rules),
        Metric::ConstraintViolationRate => constraint::violation_rate(need!(view.table), &plan.rules),
        Metric::RequiredFieldProportion => completeness::required_field_proportion(
            need!(view.table),
            &plan.required,
            config.completeness.populated_fraction,
        ),
        Metric::MissingDataPercentage => Ok(completeness::missing_data_percentage(need!(view.table))),
        Metric::DifferentialPrivacyScore => Ok(compliance::differential_privacy_score(&compliance_cfg.declared)),
        Metric::KAnonymity => compliance::k_anonymity(need!(view.table), &compliance_cfg.quasi_identifiers),
        Metric::LDiversity => {
            compliance::l_diversity(need!(view.table), &compliance_cfg.quasi_identifiers, need!(sensitive()))
        }
        Metric::TCloseness => {
            compliance::t_closeness(need!(view.table), &compliance_cfg.quasi_identifiers, need!(sensitive()))
        }
        Metric::LeakageRate => compliance::leakage_rate(need!(view.real), syn, p.tau),
        Metric::DocumentationClarityScore => Ok(documentation_clarity_result(need!(inputs
            .manifest
            .as_ref()
            .ok_or_else(|| "no manifest".to_string())))),
        Metric::SubgroupVariance | Metric::MaxMinDifference | Metric::AnalysisOfVariance => {
            Ok(MetricResult::undefined(metric, GLOBAL_ONLY))
        }
    }
}

/// Applies the optional shared PCA basis (fit on real ∪ synthetic).
fn reduce_inputs(mut inputs: Inputs, config: &EvalConfig, notes: &mut Vec<String>) -> Result<Inputs> {
    let Some(dim) = config.pca_dim else {
        return Ok(inputs);
    };
    let sets: Vec<&EmbeddingSet> = inputs.real.iter().chain(std::iter::once(&inputs.synthetic)).collect();
    let pca = Pca::fit(&sets, dim)?;
    inputs.real = inputs.real.as_ref().map(|r| pca.transform(r)).transpose()?;
    inputs.synthetic = pca.transform(&inputs.synthetic)?;
    let explained: f64 = pca.explained_ratio.iter().sum();
    notes.push(format!(
        "embeddings reduced to {dim} principal components (explained variance ratio {:.6})",
        explained
    ));
    if pca.padded > 0 {
        notes.push(format!("{} principal components were zero-padded (rank deficiency)", pca.padded));
    }
    Ok(inputs)
}

fn plain_metrics(config: &EvalConfig) -> Vec<Metric> {
    config.metrics.iter().copied().filter(|m| !m.is_consistency()).collect()
}

fn with_scope(results: Vec<MetricResult>, scope: &Scope) -> Vec<MetricResult> {
    results.into_iter().map(|r| r.with_scope(scope.clone())).collect()
}

fn local_scope_results(
    config: &EvalConfig,
    computed: &[MetricResult],
    computed_metrics: &[Metric],
    scope: &Scope,
) -> Vec<MetricResult> {
    let mut out = Vec::new();
    for &m in &config.metrics {
        if m.is_consistency() {
            out.push(MetricResult::undefined(m, GLOBAL_ONLY));
        } else if let Some(i) = computed_metrics.iter().position(|c| *c == m) {
            out.push(computed[i].clone());
        }
    }
    with_scope(out, scope)
}

/// Runs the full evaluation and returns the sealed report.
pub fn evaluate(inputs: Inputs, config: &EvalConfig) -> Result<QualityReport> {
    let plan = Plan::check(&inputs, config)?;
    let mut notes = Vec::new();
    let inputs = reduce_inputs(inputs, config, &mut notes)?;
    let plain = plain_metrics(config);

    let global_view = View::global(&inputs);
    let mut global_results = plain
        .par_iter()
        .map(|&m| compute_metric(m, &global_view, &inputs, &plan, true))
        .collect::<Result<Vec<_>>>()?;

    // Per-subgroup values serve both the subgroup scopes and consistency.
    let subgroup_labels = inputs.synthetic.subgroups().map(distinct_labels).unwrap_or_default();
    let mut subgroup_metrics = plain.clone();
    for b in &plan.bases {
        if !subgroup_metrics.contains(b) {
            subgroup_metrics.push(*b);
        }
    }
    let per_subgroup = if config.data.subgroup_column.is_some() {
        consistency::per_subgroup_metrics(&plan, &inputs, &subgroup_labels, &subgroup_metrics)?
    } else {
        Vec::new()
    };
    if config.wants_consistency() {
        let base_idx: Vec<usize> = plan
            .bases
            .iter()
            .map(|b| subgroup_metrics.iter().position(|m| m == b).expect("bases are computed"))
            .collect();
        let base_values: Vec<(String, Vec<MetricResult>)> = per_subgroup
            .iter()
            .map(|(l, rs)| (l.clone(), base_idx.iter().map(|&i| rs[i].clone()).collect()))
            .collect();
        global_results.extend(consistency::consistency_results(&plan, &inputs, &base_values, &plan.bases)?);
    }
    // Restore config order: plain metrics first were computed in config
    // order, consistency results follow grouped by metric.
    let order = |m: Metric| config.metrics.iter().position(|c| *c == m).unwrap_or(usize::MAX);
    global_results.sort_by_key(|r| order(r.metric));

    let global = aggregate::summarize_scope(Scope::Global, global_results, config);

    let region_labels = inputs.synthetic.regions().map(distinct_labels).unwrap_or_default();
    let regions = region_labels
        .par_iter()
        .map(|label| {
            let view = View::region(&inputs, &plan, label);
            let results = plain
                .iter()
                .map(|&m| compute_metric(m, &view, &inputs, &plan, false))
                .collect::<Result<Vec<_>>>()?;
            let scope = Scope::Region(label.clone());
            let results = local_scope_results(config, &results, &plain, &scope);
            Ok(aggregate::summarize_scope(scope, results, config))
        })
        .collect::<Result<Vec<_>>>()?;
    let subgroups = per_subgroup
        .iter()
        .map(|(label, results)| {
            let scope = Scope::Subgroup(label.clone());
            let results = local_scope_results(config, results, &subgroup_metrics, &scope);
            aggregate::summarize_scope(scope, results, config)
        })
        .collect();

    let mut inputs_summary = BTreeMap::from([
        ("synthetic_rows".to_string(), inputs.synthetic.len() as f64),
        ("dim".to_string(), inputs.synthetic.dim() as f64),
    ]);
    if let Some(r) = &inputs.real {
        inputs_summary.insert("real_rows".into(), r.len() as f64);
    }
    if let Some(t) = &inputs.table {
        inputs_summary.insert("table_rows".into(), t.n_rows() as f64);
    }
    if let Some(t) = &inputs.reference_table {
        inputs_summary.insert("reference_table_rows".into(), t.n_rows() as f64);
    }
    if !inputs.images.is_empty() {
        inputs_summary.insert("image_pairs".into(), inputs.images.len() as f64);
    }
    if config.selects(Metric::AnalysisOfVariance) {
        inputs_summary.insert("bootstrap_replicates".into(), config.bootstrap as f64);
    }
    if !plan.rules.is_empty() {
        inputs_summary.insert("constraint_rules".into(), plan.rules.rules.len() as f64);
    }

    let mut seeds = BTreeMap::from([("evaluation".to_string(), config.seed)]);
    if plan.bases.iter().chain(&plain).any(|m| *m == Metric::ClusteringBalance) {
        seeds.insert("kmeans".into(), config.seed);
    }
    if config.selects(Metric::AnalysisOfVariance) {
        seeds.insert("bootstrap".into(), config.seed);
    }

    Ok(aggregate::assemble_report(
        ReportParts {
            global,
            regions,
            subgroups,
            inputs: inputs_summary,
            seeds,
            declared_privacy: compliance::declared_privacy_record(&config.compliance.declared),
            notes,
        },
        config,
    ))
}

/// Checks the plan without computing anything.
pub fn validate_plan(inputs: &Inputs, config: &EvalConfig) -> Result<()> {
    Plan::check(inputs, config).map(|_| ())
}

fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let b = idx.split_off(n / 2);
    (idx, b)
}

/// Suggested bounds for an unbounded metric from its self-split values.
pub fn calibrated_bounds(direction: Direction, observed: &[f64]) -> Option<(f64, f64)> {
    if observed.is_empty() {
        return None;
    }
    let min = observed.iter().copied().fold(f64::INFINITY, f64::min);
    let max = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = [max.abs(), min.abs(), max - min, 1e-12].into_iter().fold(0.0, f64::max);
    match direction {
        Direction::Minimize => Some((min, min + 5.0 * s)),
        Direction::Maximize => Some((max - 0.8 * s, max)),
        Direction::StatSig => None,
    }
}

/// Evaluates seeded 50/50 self-splits of the reference set and writes the
/// observed ranges as normalization bounds.
pub fn calibrate(real: &EmbeddingSet, reference_table: Option<&RecordTable>, config: &EvalConfig) -> Result<BoundsFile> {
    if real.len() < 4 {
        return Err(Error::Precondition(format!(
            "calibration needs at least 4 reference rows to split, got {}",
            real.len()
        )));
    }
    let real = match config.pca_dim {
        Some(d) => Pca::fit(&[real], d)?.transform(real)?,
        None => real.clone(),
    };
    let mut inputs = Inputs::new(real.clone());
    inputs.reference_table = reference_table.cloned();
    inputs.table = reference_table.cloned();
    let (plan, _) = Plan::build(&inputs, config);
    let metrics = plain_metrics(config);

    let splits: Vec<(View, u64)> = (0..CALIBRATION_SPLITS)
        .map(|i| {
            let seed = config.seed ^ fnv1a(format!("calibrate\0{i}").as_bytes());
            let (a, b) = split_halves(real.len(), seed);
            let table = match reference_table {
                Some(t) if t.n_rows() >= 2 => Ok(t.select_rows(&split_halves(t.n_rows(), seed).1)),
                _ => Err("no reference table".to_string()),
            };
            (
                View {
                    real: Ok(real.select(&a)),
                    synthetic: real.select(&b),
                    table,
                },
                seed,
            )
        })
        .collect();

    let observed: Vec<(Metric, std::result::Result<Vec<f64>, String>)> = metrics
        .par_iter()
        .map(|&m| {
            let mut values = Vec::new();
            let mut reason = String::from("no finite value");
            for (view, _) in &splits {
                match compute_metric(m, view, &inputs, &plan, false) {
                    Ok(r) => match r.value.finite() {
                        Some(v) => values.push(v),
                        None => reason = r.value.to_string(),
                    },
                    Err(e) => reason = e.to_string(),
                }
            }
            (m, if values.is_empty() { Err(reason) } else { Ok(values) })
        })
        .collect();

    let mut file = BoundsFile::default();
    for (m, obs) in observed {
        let name = m.to_string();
        if let Ok(v) = &obs {
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            file.observed.insert(name.clone(), [min, max]);
        }
        match (default_bounds(m), obs) {
            (DefaultBounds::Fixed(lo, hi), _) => {
                file.bounds.insert(name.clone(), [lo, hi]);
                file.source.insert(name, "analytic".into());
            }
            // Coverage scores have no natural range, so the analytic upper
            // bound (n or class count) is replaced by the self-split range.
            (DefaultBounds::UpperFromDiagnostic { lo, .. }, Ok(v)) if m.criterion() == Criterion::Coverage => {
                let (clo, hi) = calibrated_bounds(m.score_direction(), &v).expect("nonempty");
                let lo = clo.max(lo).min(hi - 1e-12);
                file.bounds.insert(name.clone(), [lo, hi]);
                file.source.insert(name, format!("self-split calibration ({} splits)", v.len()));
            }
            (DefaultBounds::UpperFromDiagnostic { key, .. }, _) => {
                file.source.insert(name, format!("analytic, upper bound from `{key}` at evaluation"));
            }
            (DefaultBounds::PValue, _) => {
                file.source.insert(name, "p-value, no bounds needed".into());
            }
            (DefaultBounds::NotAggregated(why), _) => {
                file.source.insert(name, format!("not aggregated: {why}"));
            }
            (DefaultBounds::Required, Ok(v)) => {
                let (lo, hi) = calibrated_bounds(m.score_direction(), &v).expect("nonempty");
                file.bounds.insert(name.clone(), [lo, hi]);
                file.source.insert(name, format!("self-split calibration ({} splits)", v.len()));
            }
            (DefaultBounds::Required, Err(reason)) => {
                file.source.insert(name, format!("not computable: {reason}"));
            }
        }
    }
    for m in config.metrics.iter().filter(|m| m.is_consistency()) {
        if let DefaultBounds::Fixed(lo, hi) = default_bounds(*m) {
            file.bounds.insert(m.to_string(), [lo, hi]);
            file.source.insert(m.to_string(), "analytic".into());
        } else {
            file.source.insert(m.to_string(), "p-value, no bounds needed".into());
        }
    }
    Ok(file)
}
