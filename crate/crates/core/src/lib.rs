//! Toolkit for evaluating entity-quality phenotype annotations against an
//! ontology: OBO ingestion and merging, a small EL subsumption reasoner,
//! annotation file validation, and profile-based similarity scoring.

pub mod annotations;
pub mod error;
pub mod manchester;
pub mod metrics;
pub mod obo;
pub mod reasoner;
pub mod term;

pub use error::{Error, Result};
pub use term::TermId;

/// Scalar type used by the command line tools and the reference scores.
/// The metrics layer itself is generic over any [`metrics::Scalar`].
pub type Score = f64;

/// Per-state scores at the default precision.
pub type StateScore = metrics::StateScore<Score>;

/// Aggregated per-metric summary at the default precision.
pub type MetricSummary = metrics::MetricSummary<Score>;

/// Information-content table at the default precision.
pub type ICTable = metrics::ICTable<Score>;

/// Aggregated scores for a whole annotation set at the default precision.
pub type ScoreReport = metrics::ScoreReport<Score>;
