//! Descriptive card manifest: a TOML document with one table per card
//! section and snake_case keys per field. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Free-text field. Accepts a string, number, boolean or list of strings;
/// whitespace runs are collapsed so every renderer shows the same value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawText", into = "String")]
pub struct Text(String);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawText {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    List(Vec<String>),
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl From<RawText> for Text {
    fn from(r: RawText) -> Self {
        Text(match r {
            RawText::Str(s) => collapse(&s),
            RawText::Int(i) => i.to_string(),
            RawText::Float(f) => f.to_string(),
            RawText::Bool(b) => b.to_string(),
            RawText::List(items) => items.iter().map(|s| collapse(s)).collect::<Vec<_>>().join("; "),
        })
    }
}

impl From<Text> for String {
    fn from(t: Text) -> Self {
        t.0
    }
}

impl Text {
    pub fn new(s: &str) -> Self {
        Text(collapse(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Text when present and non-blank.
pub(crate) fn provided(t: &Option<Text>) -> Option<&str> {
    t.as_ref().map(Text::as_str).filter(|s| !s.is_empty())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralInfo {
    pub name: Option<Text>,
    pub release_date: Option<Text>,
    pub version_history: Option<Text>,
    pub dataset_size: Option<Text>,
    pub dataset_modality: Option<Text>,
    pub dataset_provenance: Option<Text>,
    pub dataset_intended_use: Option<Text>,
    pub dataset_labels: Option<Text>,
    pub attribution_and_licensing: Option<Text>,
    pub point_of_contact: Option<Text>,
}

/// An externally measured task metric, e.g. sensitivity or mean IoU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskMetric {
    pub name: Text,
    pub value: Text,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_threshold: Option<Text>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEvaluation {
    pub task_performance: Option<Text>,
    #[serde(default)]
    pub metrics: Vec<TaskMetric>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanEvaluation {
    pub human_study_design: Option<Text>,
    pub reader_study_results: Option<Text>,
    pub observations_and_failure_cases: Option<Text>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Considerations {
    pub privacy_and_anonymization: Option<Text>,
    pub biases: Option<Text>,
    pub limitations: Option<Text>,
    pub recommendations: Option<Text>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Usage {
    pub repository_access: Option<Text>,
    pub preprocessing_requirements: Option<Text>,
    pub user_documentation: Option<Text>,
    pub intended_audience: Option<Text>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generation {
    pub generation_method: Option<Text>,
    /// Named generator settings (architecture, epochs, sampling steps, ...).
    #[serde(default)]
    pub generation_parameters: BTreeMap<String, Text>,
    pub training_and_validation_process: Option<Text>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceDataset {
    pub purpose: Option<Text>,
    pub origin_and_source: Option<Text>,
    pub dataset_size: Option<Text>,
    pub clinical_population: Option<Text>,
    pub acquisition_devices: Option<Text>,
    pub reference_standard: Option<Text>,
    pub ground_truth_labels: Option<Text>,
    pub metadata: Option<Text>,
    pub preprocessing: Option<Text>,
    pub known_limitations: Option<Text>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub general: GeneralInfo,
    #[serde(default)]
    pub task_evaluation: TaskEvaluation,
    #[serde(default)]
    pub human_evaluation: HumanEvaluation,
    #[serde(default)]
    pub considerations: Considerations,
    #[serde(default)]
    pub usage: Usage,
    #[serde(default)]
    pub generation: Generation,
    #[serde(default)]
    pub reference_dataset: ReferenceDataset,
}

impl Manifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Manifest(e.message().to_string()))
    }

    pub fn name(&self) -> Option<&str> {
        provided(&self.general.name)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::from_toml_str(&text).map_err(|e| match e {
        Error::Manifest(m) => Error::Manifest(format!("{}: {m}", path.display())),
        other => other,
    })
}
