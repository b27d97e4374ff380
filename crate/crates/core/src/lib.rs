//! Faithfulness scoring for abstractive summaries from language-model
//! probability changes.
//!
//! The pipeline has three stages:
//!
//! 1. [`extraction`] asks a [`backend::ScoringBackend`] for five per-token
//!    log-probability series per (document, summary) pair.
//! 2. [`metrics`] turns a [`extraction::PairProbBundle`] into the three
//!    probability-change deltas, their weighted combination (FFLM), and the
//!    CoP / HaRiM / average-log-probability baselines.
//! 3. [`eval`] runs the two evaluation protocols: balanced-accuracy
//!    inconsistency detection with validation-tuned thresholds and weights,
//!    and Pearson / Spearman / Kendall correlation against human ratings.
//!
//! [`cli`] wires these into the `fflm` binary.

pub mod backend;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod extraction;
pub mod metrics;
pub mod par;
pub mod serde_ext;

pub use backend::{ScoreRequest, ScoringBackend, TokenProbSeries};
pub use dataset::{DatasetMode, EvalExample, Split};
pub use extraction::{build_pair_bundle, ExtractionConfig, PairProbBundle};
pub use metrics::{score_pair, Ablation, DeltaTriple, MetricScores, MetricWeights};
