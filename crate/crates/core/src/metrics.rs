//! Probability-change metrics.
//!
//! For a summary `Y` scored against a document `X`:
//!
//! ```text
//! raw      Δ = mean_i( p_s2s[i] - p_other[i] )
//! weighted Δ = mean_i( e^{p_s2s[i]} * (ln p_s2s[i] - ln p_other[i]) )
//! FFLM       = α·Δ_Y^prior + β·Δ_X^prior + δ·Δ_Y^cond
//! CoP        = mean_i( ln p_s2s[i] - ln p_pref[i] )
//! HaRiM      = mean_i( (1 - p_s2s[i]) * (1 - (p_s2s[i] - p_lm[i])) )
//! ```
//!
//! with `other = lm` for the two prior deltas and `other = pref` for the
//! conditional one. Probabilities are floored at [`PROB_FLOOR`] before any
//! logarithm. All means use pairwise summation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::TokenProbSeries;
use crate::extraction::PairProbBundle;

pub const PROB_FLOOR: f64 = 1e-10;
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Sum with O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

fn mean_of(terms: Vec<f64>) -> f64 {
    pairwise_sum(&terms) / terms.len() as f64
}

/// Per-token probabilities with their (floored) natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
    logs: Vec<f64>,
}

impl ProbVector {
    /// From raw probabilities in `[0, 1]`; values below the floor are raised
    /// to it.
    pub fn from_probs(probs: &[f64]) -> Result<Self, MetricsError> {
        if probs.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MetricsError::InvalidProbability(bad));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p.max(PROB_FLOOR)).collect();
        let logs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self { probs, logs })
    }

    /// From natural-log probabilities. The logs are kept as given (floored
    /// at `ln PROB_FLOOR`) so weighted deltas avoid an exp/ln round trip.
    pub fn from_logprobs(logprobs: &[f64]) -> Result<Self, MetricsError> {
        if logprobs.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if let Some(&bad) = logprobs.iter().find(|lp| lp.is_nan() || **lp > 0.0) {
            return Err(MetricsError::InvalidProbability(bad));
        }
        let floor = PROB_FLOOR.ln();
        let logs: Vec<f64> = logprobs.iter().map(|lp| lp.max(floor)).collect();
        let probs = logs.iter().map(|lp| lp.exp().max(PROB_FLOOR)).collect();
        Ok(Self { probs, logs })
    }

    pub fn from_series(series: &TokenProbSeries) -> Self {
        Self::from_logprobs(series.logprobs()).expect("series invariants guarantee valid logprobs")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logs(&self) -> &[f64] {
        &self.logs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn check_lengths(a: &ProbVector, b: &ProbVector) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Which operations the delta terms apply: the log before subtraction, the
/// `e^{p_s2s}` token weight, both, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub use_log: bool,
    pub use_token_weights: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_log: true,
            use_token_weights: true,
        }
    }
}

impl Ablation {
    pub const RAW: Ablation = Ablation {
        use_log: false,
        use_token_weights: false,
    };

    pub fn form(self) -> DeltaForm {
        match (self.use_log, self.use_token_weights) {
            (true, true) => DeltaForm::LogWeighted,
            (true, false) => DeltaForm::Log,
            (false, true) => DeltaForm::Weighted,
            (false, false) => DeltaForm::Raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaForm {
    Raw,
    Weighted,
    Log,
    LogWeighted,
}

/// Mean of the per-token change between `p_s2s` and `p_other` under the
/// given ablation. Every public delta is a special case of this.
pub fn delta_with(
    p_s2s: &ProbVector,
    p_other: &ProbVector,
    ablation: Ablation,
) -> Result<f64, MetricsError> {
    check_lengths(p_s2s, p_other)?;
    let terms = (0..p_s2s.len())
        .map(|i| {
            let diff = if ablation.use_log {
                p_s2s.logs[i] - p_other.logs[i]
            } else {
                p_s2s.probs[i] - p_other.probs[i]
            };
            if ablation.use_token_weights {
                p_s2s.probs[i].exp() * diff
            } else {
                diff
            }
        })
        .collect();
    Ok(mean_of(terms))
}

/// Prior change: `mean(p_s2s - p_lm)`, in either direction (Y or X).
pub fn delta_prior_raw(p_s2s: &ProbVector, p_other: &ProbVector) -> Result<f64, MetricsError> {
    delta_with(p_s2s, p_other, Ablation::RAW)
}

/// Conditional change: `mean(p_s2s - p_pref)`. Positive when prefixing the
/// summary does not inflate its probability.
pub fn delta_cond_raw(p_s2s: &ProbVector, p_pref: &ProbVector) -> Result<f64, MetricsError> {
    delta_with(p_s2s, p_pref, Ablation::RAW)
}

pub fn delta_weighted(p_s2s: &ProbVector, p_other: &ProbVector) -> Result<f64, MetricsError> {
    delta_with(p_s2s, p_other, Ablation::default())
}

pub fn cop(p_s2s: &ProbVector, p_pref: &ProbVector) -> Result<f64, MetricsError> {
    delta_with(
        p_s2s,
        p_pref,
        Ablation {
            use_log: true,
            use_token_weights: false,
        },
    )
}

pub fn harim(p_s2s: &ProbVector, p_lm: &ProbVector) -> Result<f64, MetricsError> {
    check_lengths(p_s2s, p_lm)?;
    let terms = p_s2s
        .probs
        .iter()
        .zip(&p_lm.probs)
        .map(|(s, l)| (1.0 - s) * (1.0 - (s - l)))
        .collect();
    Ok(mean_of(terms))
}

pub fn avg_logprob(p_s2s: &ProbVector) -> Result<f64, MetricsError> {
    if p_s2s.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(mean_of(p_s2s.logs.clone()))
}

/// Combination weights `(α, β, δ)` on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self::RATING
    }
}

impl MetricWeights {
    /// Fixed weights for the rating protocol.
    pub const RATING: MetricWeights = MetricWeights {
        alpha: 0.25,
        beta: 0.25,
        delta: 0.5,
    };

    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self, MetricsError> {
        let w = Self { alpha, beta, delta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::InvalidWeights(format!(
                    "{name}={v} outside [0, 1]"
                )));
            }
        }
        let sum = self.alpha + self.beta + self.delta;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(MetricsError::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.delta]
    }
}

/// `(Δ_Y^prior, Δ_X^prior, Δ_Y^cond)` in one [`DeltaForm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTriple {
    pub d_y_prior: f64,
    pub d_x_prior: f64,
    pub d_y_cond: f64,
    pub form: DeltaForm,
}

impl DeltaTriple {
    pub fn new(d_y_prior: f64, d_x_prior: f64, d_y_cond: f64, form: DeltaForm) -> Self {
        Self {
            d_y_prior,
            d_x_prior,
            d_y_cond,
            form,
        }
    }
}

/// `α·d_y_prior + β·d_x_prior + δ·d_y_cond`.
pub fn fflm(deltas: &DeltaTriple, weights: &MetricWeights) -> Result<f64, MetricsError> {
    weights.validate()?;
    Ok(combine(deltas, weights))
}

/// [`fflm`] without re-validating weights; for hot loops over a fixed grid.
#[inline]
pub(crate) fn combine(deltas: &DeltaTriple, weights: &MetricWeights) -> f64 {
    weights.alpha * deltas.d_y_prior
        + weights.beta * deltas.d_x_prior
        + weights.delta * deltas.d_y_cond
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringEcho {
    pub weights: MetricWeights,
    pub ablation: Ablation,
    pub model_id: String,
    pub separator: String,
    pub prefix_joiner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub deltas_raw: DeltaTriple,
    /// Deltas in the form selected by the ablation flags; `fflm` combines
    /// these.
    pub deltas_weighted: DeltaTriple,
    pub fflm: f64,
    pub cop: f64,
    pub harim: f64,
    pub avg_logprob: f64,
    pub config: ScoringEcho,
}

fn triple(
    y_s2s: &ProbVector,
    y_lm: &ProbVector,
    y_pref: &ProbVector,
    x_s2s: &ProbVector,
    x_lm: &ProbVector,
    ablation: Ablation,
) -> Result<DeltaTriple, MetricsError> {
    Ok(DeltaTriple::new(
        delta_with(y_s2s, y_lm, ablation)?,
        delta_with(x_s2s, x_lm, ablation)?,
        delta_with(y_s2s, y_pref, ablation)?,
        ablation.form(),
    ))
}

pub fn score_pair(
    bundle: &PairProbBundle,
    weights: &MetricWeights,
    ablation: Ablation,
) -> Result<MetricScores, MetricsError> {
    weights.validate()?;
    let y_lm = ProbVector::from_series(&bundle.p_y_lm);
    let y_s2s = ProbVector::from_series(&bundle.p_y_s2s);
    let y_pref = ProbVector::from_series(&bundle.p_y_pref);
    let x_lm = ProbVector::from_series(&bundle.p_x_lm);
    let x_s2s = ProbVector::from_series(&bundle.p_x_s2s);

    let deltas_raw = triple(&y_s2s, &y_lm, &y_pref, &x_s2s, &x_lm, Ablation::RAW)?;
    let deltas_weighted = triple(&y_s2s, &y_lm, &y_pref, &x_s2s, &x_lm, ablation)?;
    Ok(MetricScores {
        deltas_raw,
        fflm: combine(&deltas_weighted, weights),
        deltas_weighted,
        cop: cop(&y_s2s, &y_pref)?,
        harim: harim(&y_s2s, &y_lm)?,
        avg_logprob: avg_logprob(&y_s2s)?,
        config: ScoringEcho {
            weights: *weights,
            ablation,
            model_id: bundle.meta.model_id.clone(),
            separator: bundle.meta.separator.clone(),
            prefix_joiner: bundle.meta.prefix_joiner.clone(),
        },
    })
}
