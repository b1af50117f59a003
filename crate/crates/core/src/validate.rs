//! Pre-flight checks on embedding inputs. Problems are collected, not thrown,
//! so a caller can report all of them at once.

use crate::ingest::EvalConfig;
use crate::model::{distinct_labels, Arity, EmbeddingSet, Metric};

/// Longest list of non-finite cells reported per set.
const MAX_LISTED_CELLS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationOutcome {
    pub violations: Vec<String>,
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: impl Into<String>) {
        self.violations.push(v.into());
    }

    pub fn extend(&mut self, other: ValidationOutcome) {
        self.violations.extend(other.violations);
    }
}

/// Embedding metrics that compare against the reference set.
pub fn needs_real(metric: Metric) -> bool {
    metric.arity() == Arity::Binary && metric.uses_embeddings()
}

fn non_finite(name: &str, set: &EmbeddingSet, out: &mut ValidationOutcome) {
    let cells = set.non_finite_cells();
    for (id, col) in cells.iter().take(MAX_LISTED_CELLS) {
        out.push(format!("{name} row `{id}` column {col}: value is not finite"));
    }
    if cells.len() > MAX_LISTED_CELLS {
        out.push(format!(
            "{name}: {} more non-finite values",
            cells.len() - MAX_LISTED_CELLS
        ));
    }
}

pub fn validate_inputs(real: Option<&EmbeddingSet>, synthetic: &EmbeddingSet, config: &EvalConfig) -> ValidationOutcome {
    let mut out = ValidationOutcome::default();
    if real.is_none() {
        for m in config.metrics.iter().filter(|m| needs_real(**m)) {
            out.push(format!("binary metric requires reference set: {m}"));
        }
        if config.consistency_bases().iter().any(|m| needs_real(*m)) && config.wants_consistency() {
            out.push("binary metric requires reference set: consistency base metrics".to_string());
        }
    }
    non_finite("synthetic", synthetic, &mut out);
    if let Some(real) = real {
        non_finite("real", real, &mut out);
        if real.dim() != synthetic.dim() {
            out.push(format!(
                "dimension mismatch: real has {} columns, synthetic has {}",
                real.dim(),
                synthetic.dim()
            ));
        }
    }
    if let Some(d) = config.pca_dim {
        if d > synthetic.dim() {
            out.push(format!("pca_dim {d} exceeds the embedding dimension {}", synthetic.dim()));
        }
    }

    if let Some(col) = &config.data.subgroup_column {
        match synthetic.subgroups() {
            None => out.push(format!("synthetic data has no subgroup column `{col}`")),
            Some(labels) => {
                if let Some(i) = labels.iter().position(|l| l.is_empty()) {
                    out.push(format!("empty subgroup label on synthetic row `{}`", synthetic.ids()[i]));
                }
                let binary_bases = config.wants_consistency()
                    && config.consistency_bases().iter().any(|m| needs_real(*m));
                if let (Some(real), true) = (real, binary_bases) {
                    match real.subgroups() {
                        None => out.push(format!("real data has no subgroup column `{col}`")),
                        Some(real_labels) => {
                            for label in distinct_labels(labels) {
                                if !real_labels.contains(&label) {
                                    out.push(format!("empty subgroup `{label}` in the real set"));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if let Some(col) = &config.data.region_column {
        if synthetic.regions().is_none() {
            out.push(format!("synthetic data has no region column `{col}`"));
        }
    }
    out
}
