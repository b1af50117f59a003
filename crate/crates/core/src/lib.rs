//! Synthetic medical data evaluation against the seven quality criteria
//! (congruence, coverage, constraint, completeness, compliance,
//! comprehension, consistency), per-criterion verdicts, and data cards.

pub mod aggregate;
pub mod card;
pub mod cli;
pub mod completeness;
pub mod compliance;
pub mod congruence;
pub mod consistency;
pub mod constraint;
pub mod coverage;
pub mod engine;
pub mod error;
pub mod histogram;
pub mod harness;
pub mod hull;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod validate;

pub use error::{Error, Result};
