//! Reading datasets, configs and images from disk; writing reports.

mod config;
mod data;
mod pgm;
mod report;

pub use config::{
    read_eval_config, BoundsFile, CompletenessConfig, ComplianceConfig, ConsistencyConfig,
    ConstraintConfig, DataConfig, DeriveConfig, EvalConfig, MetricParams, DEFAULT_BOOTSTRAP,
    DEFAULT_SEED, SEED_ENV,
};
pub use data::{
    format_embeddings, format_record_table, load_image_pairs, parse_embeddings,
    parse_record_table, read_embeddings, read_image_manifest, read_record_table,
    EmbeddingColumns, TableSchema,
};
pub use pgm::{encode_pgm, parse_pgm, read_pgm, GrayImage};
pub use report::{read_report, report_to_json, write_atomic, write_report};
