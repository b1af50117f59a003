//! Completeness: presence of required fields and missing values.

use crate::error::{Error, Result};
use crate::model::{Metric, MetricResult, RecordTable};

/// Fraction of `required` fields that exist as columns and are populated in
/// at least `populated_fraction` of rows.
pub fn required_field_proportion(
    data: &RecordTable,
    required: &[String],
    populated_fraction: f64,
) -> Result<MetricResult> {
    if required.is_empty() {
        return Err(Error::Precondition("required field list is empty".into()));
    }
    if !(0.0..=1.0).contains(&populated_fraction) {
        return Err(Error::Precondition(format!(
            "populated fraction {populated_fraction} outside [0, 1]"
        )));
    }
    let n = data.n_rows();
    let mut absent = Vec::new();
    let mut present = 0usize;
    for f in required {
        let ok = data.column_index(f).is_some_and(|c| {
            let filled = data.rows().iter().filter(|r| r[c].is_some()).count();
            n > 0 && filled as f64 >= populated_fraction * n as f64
        });
        if ok {
            present += 1;
        } else {
            absent.push(f.as_str());
        }
    }
    let mut r = MetricResult::new(
        Metric::RequiredFieldProportion,
        present as f64 / required.len() as f64,
    )
    .with_diag("required", required.len() as f64)
    .with_diag("present", present as f64);
    if !absent.is_empty() {
        r = r.with_note(format!("absent or under-populated: {}", absent.join(", ")));
    }
    Ok(r)
}

/// Missing cells divided by n·m.
pub fn missing_data_percentage(data: &RecordTable) -> MetricResult {
    let cells = data.n_rows() * data.n_cols();
    if cells == 0 {
        return MetricResult::undefined(Metric::MissingDataPercentage, "empty table");
    }
    let missing = data.missing_count();
    MetricResult::new(Metric::MissingDataPercentage, missing as f64 / cells as f64)
        .with_diag("missing_cells", missing as f64)
        .with_diag("cells", cells as f64)
}
