//! Evaluation protocols: inconsistency detection (balanced accuracy with a
//! validation-tuned threshold and weight grid) and faithfulness rating
//! (Pearson / Spearman / Kendall at summary and system level), plus the
//! per-error-type subsample analysis.

pub mod correlation;
pub mod detection;
pub mod error_types;

use thiserror::Error;

use crate::dataset::ErrorType;
use crate::metrics::MetricsError;

pub use correlation::{
    correlate, summary_level_report, system_level_report, CorrelationKind, CorrelationLevel,
    CorrelationReport,
};
pub use detection::{
    balanced_accuracy, evaluate_detection, grid_search_weights, select_threshold, simplex_grid,
    Confusion, DetectionReport, GridSearchResult, ThresholdChoice,
};
pub use error_types::{error_type_analysis, ErrorAnalysisConfig, ErrorTypeReport};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("labels contain a single class; balanced accuracy needs both")]
    SingleClassLabels,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("system-level correlation needs at least 2 systems, found {0}")]
    TooFewSystems(usize),
    #[error("example {index} has no system id")]
    MissingSystemId { index: usize },
    #[error("error type {error_type} has {have} tagged examples, {need} requested")]
    InsufficientExamples {
        error_type: ErrorType,
        have: usize,
        need: usize,
    },
    #[error("no faithful examples to compare against")]
    EmptyFaithfulPool,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub(crate) fn check_lengths(left: usize, right: usize) -> Result<(), EvalError> {
    if left != right {
        return Err(EvalError::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<(), EvalError> {
    match values.iter().position(|v| v.is_nan()) {
        Some(i) => Err(EvalError::InvalidInput(format!("{what}[{i}] is NaN"))),
        None => Ok(()),
    }
}
