//! Shared data model: datasets, metric descriptors, results and reports.

mod descriptor;
mod embedding;
mod result;
mod table;

pub use descriptor::{
    catalog, Arity, Criterion, Direction, Metric, MetricDescriptor, Space, DESCRIPTORS,
};
pub use embedding::{distinct_labels, EmbeddingSet};
pub use result::{
    round9, AggregationMode, CriterionSummary, DeclaredEntry, Exclusion, MetricResult,
    MetricValue, QualityReport, Scope, ScopeReport, Thresholds, Verdict,
};
pub use table::{Cell, Column, ColumnKind, RecordTable, Value};
