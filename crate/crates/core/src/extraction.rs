//! Builds the five probability series for one (document, summary) pair.
//!
//! | series     | conditioning                          | target   |
//! |------------|---------------------------------------|----------|
//! | `p_y_lm`   | none                                  | summary  |
//! | `p_y_s2s`  | document + separator                  | summary  |
//! | `p_y_pref` | summary + joiner + document + sep     | summary  |
//! | `p_x_lm`   | none                                  | document |
//! | `p_x_s2s`  | summary + separator                   | document |
//!
//! Unconditioned calls carry no separator. When the document does not fit
//! the context budget it is cut from its tail; the summary, the separator
//! and the prefix are never shortened.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ScoreRequest, ScoringBackend, TokenProbSeries};

pub const DEFAULT_SEPARATOR: &str = "\nTL;DR\n";
pub const DEFAULT_JOINER: &str = "\n";
pub const DEFAULT_CONTEXT_BUDGET: usize = 2048;
pub const MIN_CONTEXT_BUDGET: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationPolicy {
    TruncateDocumentTail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub separator: String,
    pub prefix_joiner: String,
    pub context_budget: usize,
    pub truncation_policy: TruncationPolicy,
    pub model_id: String,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            separator: DEFAULT_SEPARATOR.into(),
            prefix_joiner: DEFAULT_JOINER.into(),
            context_budget: DEFAULT_CONTEXT_BUDGET,
            truncation_policy: TruncationPolicy::TruncateDocumentTail,
            model_id: "default".into(),
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.separator.is_empty() {
            return Err(ExtractionError::InvalidConfig(
                "separator must be non-empty".into(),
            ));
        }
        if self.context_budget < MIN_CONTEXT_BUDGET {
            return Err(ExtractionError::InvalidConfig(format!(
                "context budget {} is below the minimum of {MIN_CONTEXT_BUDGET}",
                self.context_budget
            )));
        }
        Ok(())
    }
}

/// Which of the five scoring calls a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    SummaryPrior,
    SummaryGivenDocument,
    SummaryGivenPrefix,
    DocumentPrior,
    DocumentGivenSummary,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesKind::SummaryPrior => "p_y_lm",
            SeriesKind::SummaryGivenDocument => "p_y_s2s",
            SeriesKind::SummaryGivenPrefix => "p_y_pref",
            SeriesKind::DocumentPrior => "p_x_lm",
            SeriesKind::DocumentGivenSummary => "p_x_s2s",
        })
    }
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("empty input: {0} is empty after trimming")]
    EmptyInput(&'static str),
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
    #[error("context budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("scoring call {call} failed: {source}")]
    Backend {
        call: SeriesKind,
        #[source]
        source: BackendError,
    },
    #[error("misaligned series: {0}")]
    Misaligned(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub model_id: String,
    pub separator: String,
    pub prefix_joiner: String,
    pub truncated: bool,
    pub original_document_tokens: usize,
    pub retained_document_tokens: usize,
    pub summary_tokens: usize,
}

/// Every probability series one pair needs.
///
/// Invariants: the three summary series share one length `m >= 1`; the two
/// document series share one length `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProbBundle {
    pub p_y_lm: TokenProbSeries,
    pub p_y_s2s: TokenProbSeries,
    pub p_y_pref: TokenProbSeries,
    pub p_x_lm: TokenProbSeries,
    pub p_x_s2s: TokenProbSeries,
    pub meta: BundleMeta,
}

impl PairProbBundle {
    /// Assembles a bundle, checking the length invariants.
    pub fn new(
        p_y_lm: TokenProbSeries,
        p_y_s2s: TokenProbSeries,
        p_y_pref: TokenProbSeries,
        p_x_lm: TokenProbSeries,
        p_x_s2s: TokenProbSeries,
        meta: BundleMeta,
    ) -> Result<Self, ExtractionError> {
        let m = p_y_lm.len();
        if p_y_s2s.len() != m || p_y_pref.len() != m {
            return Err(ExtractionError::Misaligned(format!(
                "summary series lengths differ: lm={m}, s2s={}, pref={}",
                p_y_s2s.len(),
                p_y_pref.len()
            )));
        }
        if p_x_lm.len() != p_x_s2s.len() {
            return Err(ExtractionError::Misaligned(format!(
                "document series lengths differ: lm={}, s2s={}",
                p_x_lm.len(),
                p_x_s2s.len()
            )));
        }
        for (i, ((a, b), c)) in p_y_lm
            .tokens()
            .iter()
            .zip(p_y_s2s.tokens())
            .zip(p_y_pref.tokens())
            .enumerate()
        {
            if a != b || a != c {
                log::warn!("summary token {i} differs across calls: {a:?} / {b:?} / {c:?}");
                break;
            }
        }
        Ok(Self {
            p_y_lm,
            p_y_s2s,
            p_y_pref,
            p_x_lm,
            p_x_s2s,
            meta,
        })
    }

    pub fn summary_len(&self) -> usize {
        self.p_y_lm.len()
    }

    pub fn document_len(&self) -> usize {
        self.p_x_lm.len()
    }
}

/// First `min(len, budget)` tokens, in order.
pub fn truncate_document<T: Clone>(doc_tokens: &[T], budget: usize) -> Vec<T> {
    doc_tokens[..doc_tokens.len().min(budget)].to_vec()
}

/// Cuts `text` right after its `keep`-th whitespace-delimited token,
/// preserving the original spacing of what remains.
fn truncate_text(text: &str, keep: usize) -> &str {
    if keep == 0 {
        return "";
    }
    match text.split_whitespace().nth(keep - 1) {
        Some(token) => {
            let end = token.as_ptr() as usize - text.as_ptr() as usize + token.len();
            &text[..end]
        }
        None => text,
    }
}

pub fn build_pair_bundle(
    document: &str,
    summary: &str,
    config: &ExtractionConfig,
    backend: &dyn ScoringBackend,
) -> Result<PairProbBundle, ExtractionError> {
    config.validate()?;
    let document = document.trim();
    let summary = summary.trim();
    if document.is_empty() {
        return Err(ExtractionError::EmptyInput("document"));
    }
    if summary.is_empty() {
        return Err(ExtractionError::EmptyInput("summary"));
    }

    let summary_tokens = backend.count_tokens(summary);
    let overhead = 2 * summary_tokens
        + backend.count_tokens(&config.separator)
        + backend.count_tokens(&config.prefix_joiner);
    // The prefixed call carries the summary twice and is the longest input.
    let allowance = config.context_budget.saturating_sub(overhead);
    if allowance == 0 {
        return Err(ExtractionError::BudgetExceeded(format!(
            "summary ({summary_tokens} tokens) and separator leave no room for the document \
             within a budget of {}",
            config.context_budget
        )));
    }

    let original_document_tokens = backend.count_tokens(document);
    let (document, truncated) = if original_document_tokens > allowance {
        match config.truncation_policy {
            TruncationPolicy::Error => {
                return Err(ExtractionError::BudgetExceeded(format!(
                    "document has {original_document_tokens} tokens but only {allowance} fit"
                )))
            }
            TruncationPolicy::TruncateDocumentTail => (truncate_text(document, allowance), true),
        }
    } else {
        (document, false)
    };
    let retained_document_tokens = backend.count_tokens(document);

    let sep = &config.separator;
    let call = |kind: SeriesKind, conditioning: String, target: &str| {
        ScoreRequest::new(conditioning, target, config.model_id.clone())
            .and_then(|request| backend.score(&request))
            .map_err(|source| ExtractionError::Backend { call: kind, source })
    };

    let p_y_lm = call(SeriesKind::SummaryPrior, String::new(), summary)?;
    let p_y_s2s = call(
        SeriesKind::SummaryGivenDocument,
        format!("{document}{sep}"),
        summary,
    )?;
    let p_y_pref = call(
        SeriesKind::SummaryGivenPrefix,
        format!("{summary}{}{document}{sep}", config.prefix_joiner),
        summary,
    )?;
    let p_x_lm = call(SeriesKind::DocumentPrior, String::new(), document)?;
    let p_x_s2s = call(
        SeriesKind::DocumentGivenSummary,
        format!("{summary}{sep}"),
        document,
    )?;

    PairProbBundle::new(
        p_y_lm,
        p_y_s2s,
        p_y_pref,
        p_x_lm,
        p_x_s2s,
        BundleMeta {
            model_id: config.model_id.clone(),
            separator: config.separator.clone(),
            prefix_joiner: config.prefix_joiner.clone(),
            truncated,
            original_document_tokens,
            retained_document_tokens,
            summary_tokens,
        },
    )
}
