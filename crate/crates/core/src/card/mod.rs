//! The synthetic medical data card: eight sections of descriptive and
//! quantitative fields, populated from a manifest and a quality report.

mod manifest;
mod render;

use serde::{Deserialize, Serialize};

use crate::aggregate::{normalize_value, verdict};
use crate::error::{Error, Result};
use crate::model::{
    CriterionSummary, DeclaredEntry, Direction, Exclusion, Metric, MetricResult, QualityReport, Thresholds, Verdict,
};

pub use manifest::{
    read_manifest, Considerations, GeneralInfo, Generation, HumanEvaluation, Manifest, ReferenceDataset, TaskEvaluation,
    TaskMetric, Text, Usage,
};
pub use render::{parse_structured, render, CardFormat};

use manifest::provided;

pub const NOT_PROVIDED: &str = "not provided";
pub const CARD_FORMAT_VERSION: u32 = 1;

/// Section titles, in card order.
pub const SECTION_TITLES: [&str; 8] = [
    "Synthetic Data General Information",
    "Data Quality Evaluation (7 Cs) Quantitative Results",
    "Task-based Evaluation (Quantitative Results)",
    "Human-based Evaluation (Qualitative Results)",
    "Ethical, Legal, and Practical Considerations",
    "Synthetic Dataset Usage",
    "Synthetic Dataset Training & Validation Process",
    "Reference Dataset General Information",
];

/// One metric line in a criterion block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRow {
    pub metric: String,
    pub raw: String,
    pub normalized: Option<f64>,
    pub direction: String,
}

/// Aggregate score of the criterion in a region or subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalScore {
    pub scope: String,
    pub score: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionBlock {
    pub score: Option<f64>,
    pub verdict: Verdict,
    pub metrics: Vec<MetricRow>,
    #[serde(default)]
    pub excluded: Vec<Exclusion>,
    #[serde(default)]
    pub local: Vec<LocalScore>,
    /// Labelled details: declared privacy parameters, rubric items.
    #[serde(default)]
    pub details: Vec<DeclaredEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CriterionBlock {
    pub fn headline(&self) -> String {
        match self.score {
            Some(s) => format!("{s:.1} ({})", self.verdict),
            None => Verdict::NotEvaluated.label().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldContent {
    Text { text: String },
    NotProvided,
    TaskMetrics { metrics: Vec<TaskMetric> },
    Criterion(CriterionBlock),
}

impl FieldContent {
    fn text(t: Option<&str>) -> Self {
        match t {
            Some(s) => FieldContent::Text { text: s.to_string() },
            None => FieldContent::NotProvided,
        }
    }

    /// One-line value shown next to the field label.
    pub fn summary(&self) -> String {
        match self {
            FieldContent::Text { text } => text.clone(),
            FieldContent::NotProvided => NOT_PROVIDED.to_string(),
            FieldContent::TaskMetrics { metrics } if metrics.is_empty() => NOT_PROVIDED.to_string(),
            FieldContent::TaskMetrics { metrics } => metrics
                .iter()
                .map(|m| match &m.acceptance_threshold {
                    Some(t) => format!("{}: {} (acceptance: {})", m.name.as_str(), m.value.as_str(), t.as_str()),
                    None => format!("{}: {}", m.name.as_str(), m.value.as_str()),
                })
                .collect::<Vec<_>>()
                .join("; "),
            FieldContent::Criterion(b) => b.headline(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardField {
    pub label: String,
    pub content: FieldContent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardSection {
    pub number: u8,
    pub title: String,
    pub fields: Vec<CardField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardDocument {
    pub format_version: u32,
    /// Digest of the quality report section 2 was built from.
    pub report_digest: Option<String>,
    pub sections: Vec<CardSection>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CardDocument {
    pub fn field(&self, label: &str) -> Option<&CardField> {
        self.sections.iter().flat_map(|s| &s.fields).find(|f| f.label == label)
    }

    /// Fails when `report` is not the report this card was built from.
    pub fn verify_report(&self, report: &QualityReport) -> Result<()> {
        let actual = report.compute_digest();
        match &self.report_digest {
            Some(d) if *d == actual && report.digest == actual => Ok(()),
            other => Err(Error::ReportChanged {
                card: other.clone().unwrap_or_else(|| "none".into()),
                report: actual,
            }),
        }
    }
}

/// One documentation-clarity checklist item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RubricItem {
    pub label: &'static str,
    pub satisfied: bool,
}

/// The nine checklist items, evaluated on a manifest.
pub fn clarity_rubric(m: &Manifest) -> Vec<RubricItem> {
    let r = &m.reference_dataset;
    let items = [
        ("Generation method described", provided(&m.generation.generation_method).is_some()),
        (
            "Generation parameters enumerated",
            m.generation.generation_parameters.values().any(|v| !v.as_str().is_empty()),
        ),
        (
            "Training/validation process described",
            provided(&m.generation.training_and_validation_process).is_some(),
        ),
        ("Version history present", provided(&m.general.version_history).is_some()),
        (
            "Reference dataset section populated",
            [&r.purpose, &r.origin_and_source, &r.dataset_size].iter().all(|f| provided(f).is_some()),
        ),
        (
            "Preprocessing documented",
            provided(&m.usage.preprocessing_requirements).is_some() || provided(&r.preprocessing).is_some(),
        ),
        ("License present", provided(&m.general.attribution_and_licensing).is_some()),
        ("Contact present", provided(&m.general.point_of_contact).is_some()),
        (
            "Known limitations stated",
            provided(&m.considerations.limitations).is_some() || provided(&r.known_limitations).is_some(),
        ),
    ];
    items
        .into_iter()
        .map(|(label, satisfied)| RubricItem { label, satisfied })
        .collect()
}

/// 1 plus the number of satisfied rubric items (so 1..=10).
pub fn documentation_clarity_score(m: &Manifest) -> (u32, Vec<RubricItem>) {
    let items = clarity_rubric(m);
    let score = (1 + items.iter().filter(|i| i.satisfied).count() as u32).min(10);
    (score, items)
}

/// The Documentation Clarity Score as a metric result.
pub fn documentation_clarity_result(m: &Manifest) -> MetricResult {
    let (score, items) = documentation_clarity_score(m);
    items.iter().enumerate().fold(
        MetricResult::new(Metric::DocumentationClarityScore, f64::from(score)),
        |r, (i, item)| r.with_diag(&format!("item{}", i + 1), if item.satisfied { 1.0 } else { 0.0 }),
    )
}

fn format_raw(r: &MetricResult) -> String {
    r.value.to_string()
}

fn metric_row(r: &MetricResult) -> MetricRow {
    let name = match r.target {
        Some(t) => format!("{} [{}]", r.metric.display_name(), t.display_name()),
        None => r.metric.display_name().to_string(),
    };
    MetricRow {
        metric: name,
        raw: format_raw(r),
        normalized: r.normalized,
        direction: r.metric.score_direction().label().to_string(),
    }
}

fn criterion_notes(c: crate::model::Criterion, report: &QualityReport) -> Vec<String> {
    use crate::model::Criterion as C;
    let notes: Vec<String> = match c {
        C::Congruence => vec![
            "Frechet distance is computed on the supplied embeddings rather than Inception activations and is labelled FrechetDistance(embeddings).".into(),
            "PSNR and SSIM are computed only for explicitly paired images.".into(),
            "Text n-gram metrics (BLEU, ROUGE) are not computed; enter them under Task-Specific Metrics.".into(),
        ],
        C::Coverage => vec![
            "Inception Score is computed from externally supplied class probabilities.".into(),
        ],
        C::Constraint => vec![
            "Nearest Invalid Datapoint is reported as the mean margin of valid rows to the nearest rule boundary. Read literally (distance to the nearest invalid exemplar, minimized) it would reward proximity to invalid data.".into(),
            "Constraints are evaluated on tabular features; graph modeling of extracted tokens is not performed.".into(),
        ],
        C::Completeness => vec!["Semantic completeness of free text is not assessed.".into()],
        C::Compliance => vec![
            "Differential privacy parameters are declared by the data producer and not verified.".into(),
            "T-closeness distance is minimized; its normalized score is 100 at distance 0.".into(),
            "Leakage rate counts synthetic rows within the 1st-percentile real nearest-neighbour distance of a real row.".into(),
        ],
        C::Comprehension => vec!["Documentation clarity is a nine-item checklist scored from 1 to 10.".into()],
        C::Consistency => {
            let b = report.inputs.get("bootstrap_replicates").copied().unwrap_or(0.0);
            vec![format!(
                "ANOVA replicates come from seeded bootstrap resampling of each subgroup (B = {b})."
            )]
        }
    };
    notes
}

fn criterion_block(c: crate::model::Criterion, report: &QualityReport) -> CriterionBlock {
    let summary: Option<&CriterionSummary> = report.global.criterion(c);
    let metrics = report
        .global
        .results
        .iter()
        .filter(|r| r.criterion() == c)
        .map(metric_row)
        .collect();
    let local = report
        .regions
        .iter()
        .chain(&report.subgroups)
        .filter_map(|s| {
            s.criterion(c).map(|cs| LocalScore {
                scope: s.scope.to_string(),
                score: cs.score,
                verdict: cs.verdict,
            })
        })
        .collect();
    let details = if c == crate::model::Criterion::Compliance {
        report.declared_privacy.clone()
    } else {
        Vec::new()
    };
    CriterionBlock {
        score: summary.and_then(|s| s.score),
        verdict: summary.map_or(Verdict::NotEvaluated, |s| s.verdict),
        metrics,
        excluded: summary.map(|s| s.excluded.clone()).unwrap_or_default(),
        local,
        details,
        notes: criterion_notes(c, report),
    }
}

/// Comprehension filled from the manifest when the report has no defined
/// clarity score.
fn fill_comprehension(block: &mut CriterionBlock, manifest: &Manifest, thresholds: Thresholds, report_has_score: bool) {
    let (score, items) = documentation_clarity_score(manifest);
    block.details = items
        .iter()
        .map(|i| DeclaredEntry {
            field: i.label.to_string(),
            value: if i.satisfied { "yes" } else { "no" }.to_string(),
        })
        .collect();
    if report_has_score {
        return;
    }
    let normalized = normalize_value(Direction::Maximize, f64::from(score), 1.0, 10.0);
    block.metrics.retain(|m| m.metric != Metric::DocumentationClarityScore.display_name());
    block.metrics.push(MetricRow {
        metric: Metric::DocumentationClarityScore.display_name().to_string(),
        raw: score.to_string(),
        normalized: Some(normalized),
        direction: Direction::Maximize.label().to_string(),
    });
    block.excluded.retain(|e| e.metric != Metric::DocumentationClarityScore.name());
    block.score = Some(normalized);
    block.verdict = verdict(normalized, thresholds);
    block.notes.push("Documentation clarity was computed from the manifest when the card was built.".into());
}

fn text_field(label: &str, t: &Option<Text>) -> CardField {
    CardField {
        label: label.to_string(),
        content: FieldContent::text(provided(t)),
    }
}

fn section(number: u8, fields: Vec<CardField>) -> CardSection {
    CardSection {
        number,
        title: SECTION_TITLES[number as usize - 1].to_string(),
        fields,
    }
}

/// Builds the card. Without a report every section-2 field reads "not
/// evaluated" except Comprehension, which comes from the manifest.
pub fn build_card(manifest: &Manifest, report: Option<&QualityReport>) -> Result<CardDocument> {
    if manifest.name().is_none() {
        return Err(Error::Manifest("missing required section-1 field `name`".into()));
    }
    if let Some(r) = report {
        if !r.is_intact() {
            return Err(Error::ReportChanged {
                card: r.digest.clone(),
                report: r.compute_digest(),
            });
        }
    }
    let g = &manifest.general;
    let s1 = section(
        1,
        vec![
            text_field("Name", &g.name),
            text_field("Release Date", &g.release_date),
            text_field("Version History", &g.version_history),
            text_field("Dataset Size", &g.dataset_size),
            text_field("Dataset Modality", &g.dataset_modality),
            text_field("Dataset Provenance", &g.dataset_provenance),
            text_field("Dataset Intended Use", &g.dataset_intended_use),
            text_field("Dataset Labels", &g.dataset_labels),
            text_field("Attribution and Licensing", &g.attribution_and_licensing),
            text_field("Point of Contact", &g.point_of_contact),
        ],
    );

    let thresholds = report.map(|r| r.thresholds).unwrap_or_default();
    let empty_report;
    let rep = match report {
        Some(r) => r,
        None => {
            empty_report = crate::aggregate::empty_report(thresholds);
            &empty_report
        }
    };
    let s2_fields = crate::model::Criterion::ALL
        .iter()
        .map(|&c| {
            let mut block = criterion_block(c, rep);
            if c == crate::model::Criterion::Comprehension {
                let has = rep
                    .global
                    .result(Metric::DocumentationClarityScore)
                    .is_some_and(|r| r.value.is_defined());
                fill_comprehension(&mut block, manifest, thresholds, has);
            }
            CardField {
                label: c.as_str().to_string(),
                content: FieldContent::Criterion(block),
            }
        })
        .collect();
    let s2 = section(2, s2_fields);

    let t = &manifest.task_evaluation;
    let s3 = section(
        3,
        vec![
            text_field("Task Performance", &t.task_performance),
            CardField {
                label: "Task-Specific Metrics".into(),
                content: if t.metrics.is_empty() {
                    FieldContent::NotProvided
                } else {
                    FieldContent::TaskMetrics {
                        metrics: t.metrics.clone(),
                    }
                },
            },
        ],
    );
    let h = &manifest.human_evaluation;
    let s4 = section(
        4,
        vec![
            text_field("Human Study Design", &h.human_study_design),
            text_field("Reader Study Results", &h.reader_study_results),
            text_field("Observations & Failure Cases", &h.observations_and_failure_cases),
        ],
    );
    let e = &manifest.considerations;
    let s5 = section(
        5,
        vec![
            text_field("Privacy & Anonymization", &e.privacy_and_anonymization),
            text_field("Biases", &e.biases),
            text_field("Limitations", &e.limitations),
            text_field("Recommendations", &e.recommendations),
        ],
    );
    let u = &manifest.usage;
    let s6 = section(
        6,
        vec![
            text_field("Repository Access", &u.repository_access),
            text_field("Preprocessing Requirements", &u.preprocessing_requirements),
            text_field("User Documentation", &u.user_documentation),
            text_field("Intended Audience", &u.intended_audience),
        ],
    );
    let gen = &manifest.generation;
    let method = match (provided(&gen.generation_method), gen.generation_parameters.is_empty()) {
        (m, true) => m.map(str::to_string),
        (m, false) => {
            let params = gen
                .generation_parameters
                .iter()
                .map(|(k, v)| format!("{k}={}", v.as_str()))
                .collect::<Vec<_>>()
                .join(", ");
            Some(match m {
                Some(m) => format!("{m} Parameters: {params}."),
                None => format!("Parameters: {params}."),
            })
        }
    };
    let s7 = section(
        7,
        vec![
            CardField {
                label: "Generation Method".into(),
                content: FieldContent::text(method.as_deref()),
            },
            text_field("Training & Validation Process", &gen.training_and_validation_process),
        ],
    );
    let r = &manifest.reference_dataset;
    let s8 = section(
        8,
        vec![
            text_field("Purpose", &r.purpose),
            text_field("Origin & Source", &r.origin_and_source),
            text_field("Dataset Size", &r.dataset_size),
            text_field("Clinical Population", &r.clinical_population),
            text_field("Acquisition Devices", &r.acquisition_devices),
            text_field("Reference Standard", &r.reference_standard),
            text_field("Ground Truth Labels", &r.ground_truth_labels),
            text_field("Metadata", &r.metadata),
            text_field("Preprocessing", &r.preprocessing),
            text_field("Known Limitations", &r.known_limitations),
        ],
    );

    let mut notes = vec![format!(
        "Verdicts: good if score >= {}, moderate if {} <= score < {}, low otherwise.",
        thresholds.good, thresholds.moderate, thresholds.good
    )];
    match report {
        Some(r) => {
            notes.push(format!(
                "Criterion scores are {} means of normalized metric scores; metrics are weighted equally unless configured otherwise.",
                match r.aggregation {
                    crate::model::AggregationMode::Arithmetic => "arithmetic",
                    crate::model::AggregationMode::Geometric => "geometric",
                }
            ));
            notes.push(format!("Quality report digest: {}", r.digest));
        }
        None => notes.push("No quality report was supplied; section 2 is not evaluated.".into()),
    }

    Ok(CardDocument {
        format_version: CARD_FORMAT_VERSION,
        report_digest: report.map(|r| r.digest.clone()),
        sections: vec![s1, s2, s3, s4, s5, s6, s7, s8],
        notes,
    })
}
