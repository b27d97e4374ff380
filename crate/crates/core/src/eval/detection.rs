//! Balanced-accuracy inconsistency detection.
//!
//! Positive class is "consistent" (label 1); a score at or above the
//! threshold predicts consistent.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_lengths, EvalError};
use crate::metrics::{self, DeltaTriple, MetricWeights};
use crate::par;
use crate::serde_ext::extended_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(labels: &[bool], predictions: &[bool]) -> Result<Self, EvalError> {
        check_lengths(labels.len(), predictions.len())?;
        let mut c = Confusion::default();
        for (&label, &pred) in labels.iter().zip(predictions) {
            match (label, pred) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    /// `(TPR + TNR) / 2`. Requires both classes.
    pub fn balanced_accuracy(&self) -> Result<f64, EvalError> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(EvalError::SingleClassLabels);
        }
        let tpr = self.tp as f64 / self.positives() as f64;
        let tnr = self.tn as f64 / self.negatives() as f64;
        Ok((tpr + tnr) / 2.0)
    }

    // Balanced accuracy scaled by 2·P·N; exact for comparing confusions
    // over the same labels.
    fn rank_key(&self) -> u128 {
        u128::from(self.tp) * u128::from(self.negatives())
            + u128::from(self.tn) * u128::from(self.positives())
    }
}

pub fn balanced_accuracy(labels: &[bool], predictions: &[bool]) -> Result<f64, EvalError> {
    Confusion::from_predictions(labels, predictions)?.balanced_accuracy()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub balanced_accuracy: f64,
    pub confusion: Confusion,
}

/// Threshold strictly between two distinct sorted scores, so that `>= t`
/// separates them exactly.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

fn check_labels(labels: &[bool]) -> Result<(), EvalError> {
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(EvalError::SingleClassLabels);
    }
    Ok(())
}

/// Exhaustive threshold search over `{-inf} ∪ midpoints ∪ {+inf}`.
///
/// Returns the candidate with the highest balanced accuracy; ties go to the
/// smallest threshold. Runs in `O(n log n)` by sweeping sorted scores.
pub fn select_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdChoice, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores, "scores")?;
    check_labels(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    let mut current = Confusion {
        tp: positives,
        fp: negatives,
        tn: 0,
        fn_: 0,
    };
    let mut best = (f64::NEG_INFINITY, current);

    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        // Move the whole tie group below the threshold.
        while i < order.len() && scores[order[i]] == value {
            if labels[order[i]] {
                current.tp -= 1;
                current.fn_ += 1;
            } else {
                current.fp -= 1;
                current.tn += 1;
            }
            i += 1;
        }
        let threshold = match order.get(i) {
            Some(&next) => midpoint(value, scores[next]),
            None => f64::INFINITY,
        };
        if current.rank_key() > best.1.rank_key() {
            best = (threshold, current);
        }
    }

    Ok(ThresholdChoice {
        threshold: best.0,
        balanced_accuracy: best.1.balanced_accuracy()?,
        confusion: best.1,
    })
}

/// All `(α, β, δ)` with components in `{0, step, 2·step, ..., 1}` summing
/// to 1, in lexicographic order.
pub fn simplex_grid(step: f64) -> Result<Vec<MetricWeights>, EvalError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(EvalError::InvalidInput(format!(
            "step {step} must be in (0, 1]"
        )));
    }
    let divisions = (1.0 / step).round();
    if (divisions * step - 1.0).abs() > 1e-9 {
        return Err(EvalError::InvalidInput(format!(
            "step {step} does not divide 1 evenly"
        )));
    }
    let k = divisions as u32;
    let kf = f64::from(k);
    let mut grid = Vec::with_capacity(((k + 1) * (k + 2) / 2) as usize);
    for a in 0..=k {
        for b in 0..=(k - a) {
            let c = k - a - b;
            grid.push(MetricWeights {
                alpha: f64::from(a) / kf,
                beta: f64::from(b) / kf,
                delta: f64::from(c) / kf,
            });
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub weights: MetricWeights,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub balanced_accuracy: f64,
    pub confusion: Confusion,
    pub combos_evaluated: usize,
    pub step: f64,
}

/// Picks the grid weights whose tuned threshold gives the highest
/// validation balanced accuracy. Ties go to the lexicographically smallest
/// `(α, β, δ)`. Combos are evaluated in parallel; the reduction is by grid
/// position, so the result does not depend on scheduling.
pub fn grid_search_weights(
    val_deltas: &[DeltaTriple],
    val_labels: &[bool],
    step: f64,
) -> Result<GridSearchResult, EvalError> {
    check_lengths(val_deltas.len(), val_labels.len())?;
    check_labels(val_labels)?;
    let grid = simplex_grid(step)?;

    let choices = par::map(&grid, |w| {
        let scores: Vec<f64> = val_deltas.iter().map(|d| metrics::combine(d, w)).collect();
        select_threshold(&scores, val_labels)
    });

    let mut best: Option<(usize, ThresholdChoice)> = None;
    for (i, choice) in choices.into_iter().enumerate() {
        let choice = choice?;
        let better = match &best {
            None => true,
            Some((_, b)) => choice.confusion.rank_key() > b.confusion.rank_key(),
        };
        if better {
            best = Some((i, choice));
        }
    }
    let (idx, choice) = best.ok_or(EvalError::Empty)?;
    log::info!(
        "grid search evaluated {} combos; best {:?} with BA {:.4}",
        grid.len(),
        grid[idx],
        choice.balanced_accuracy
    );
    Ok(GridSearchResult {
        weights: grid[idx],
        threshold: choice.threshold,
        balanced_accuracy: choice.balanced_accuracy,
        confusion: choice.confusion,
        combos_evaluated: grid.len(),
        step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub weights: MetricWeights,
    pub balanced_accuracy: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub n: usize,
}

impl DetectionReport {
    pub fn confusion(&self) -> Confusion {
        Confusion {
            tp: self.tp,
            fp: self.fp,
            tn: self.tn,
            fn_: self.fn_,
        }
    }
}

/// Applies a fixed threshold to precomputed scores.
pub fn evaluate_detection(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    weights: MetricWeights,
) -> Result<DetectionReport, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores, "scores")?;
    let predictions: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let c = Confusion::from_predictions(labels, &predictions)?;
    Ok(DetectionReport {
        threshold,
        weights,
        balanced_accuracy: c.balanced_accuracy()?,
        tp: c.tp,
        fp: c.fp,
        tn: c.tn,
        fn_: c.fn_,
        n: labels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::DeltaForm;
    use proptest::prelude::*;

    fn b(xs: &[u8]) -> Vec<bool> {
        xs.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(
            balanced_accuracy(&b(&[1, 1, 0, 0]), &b(&[1, 0, 0, 0])).unwrap(),
            0.75
        );
        assert_eq!(
            balanced_accuracy(&b(&[1, 0, 1]), &b(&[1, 0, 1])).unwrap(),
            1.0
        );
        assert_eq!(balanced_accuracy(&b(&[1, 0]), &b(&[1, 1])).unwrap(), 0.5);
    }

    #[test]
    fn balanced_accuracy_errors() {
        assert_eq!(
            balanced_accuracy(&b(&[1, 0]), &b(&[1])),
            Err(EvalError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            balanced_accuracy(&b(&[1, 1]), &b(&[1, 0])),
            Err(EvalError::SingleClassLabels)
        );
        assert_eq!(balanced_accuracy(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn threshold_examples() {
        let t = select_threshold(&[0.1, 0.2, 0.3, 0.4], &b(&[0, 0, 1, 1])).unwrap();
        assert!((t.threshold - 0.25).abs() < 1e-15);
        assert_eq!(t.balanced_accuracy, 1.0);

        let t = select_threshold(&[0.4, 0.3, 0.2, 0.1], &b(&[0, 0, 1, 1])).unwrap();
        assert_eq!(t.balanced_accuracy, 0.5);
        assert_eq!(t.threshold, f64::NEG_INFINITY);

        let t = select_threshold(&[0.7; 5], &b(&[0, 1, 0, 1, 1])).unwrap();
        assert_eq!(t.balanced_accuracy, 0.5);
    }

    #[test]
    fn threshold_rejects_nan() {
        assert!(matches!(
            select_threshold(&[0.1, f64::NAN], &b(&[0, 1])),
            Err(EvalError::InvalidInput(_))
        ));
    }

    #[test]
    fn midpoint_of_adjacent_floats_still_separates() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(m > lo && m <= hi);
        let t = select_threshold(&[lo, hi], &b(&[0, 1])).unwrap();
        assert_eq!(t.balanced_accuracy, 1.0);
    }

    #[test]
    fn grid_has_66_points_at_tenths() {
        let g = simplex_grid(0.1).unwrap();
        assert_eq!(g.len(), 66);
        assert!(g.iter().all(|w| w.validate().is_ok()));
        assert_eq!(simplex_grid(0.5).unwrap().len(), 6);
        assert_eq!(simplex_grid(1.0).unwrap().len(), 3);
        assert!(simplex_grid(0.3).is_err());
        assert!(simplex_grid(0.0).is_err());
    }

    #[test]
    fn grid_search_picks_the_separating_component() {
        // d_y_cond separates; the other two are label-independent noise.
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let deltas: Vec<DeltaTriple> = (0..40)
            .map(|i| {
                let noise_a = ((i * 37) % 11) as f64 - 5.0;
                let noise_b = ((i * 53) % 13) as f64 - 6.0;
                let sep = if i % 2 == 0 { 0.5 } else { -0.5 };
                DeltaTriple::new(noise_a * 10.0, noise_b * 10.0, sep, DeltaForm::LogWeighted)
            })
            .collect();
        let r = grid_search_weights(&deltas, &labels, 0.1).unwrap();
        assert_eq!(r.combos_evaluated, 66);
        assert_eq!(r.balanced_accuracy, 1.0);
        assert_eq!(r.weights.as_array(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_search_rejects_single_class() {
        let d = vec![DeltaTriple::new(0.0, 0.0, 0.0, DeltaForm::Raw); 3];
        assert_eq!(
            grid_search_weights(&d, &[true; 3], 0.1),
            Err(EvalError::SingleClassLabels)
        );
        assert_eq!(grid_search_weights(&[], &[], 0.1), Err(EvalError::Empty));
    }

    #[test]
    fn detection_report_counts() {
        let scores = [0.1, 0.5, 0.9, 0.2];
        let labels = b(&[0, 1, 1, 0]);
        let r = evaluate_detection(&scores, &labels, 0.3, MetricWeights::RATING).unwrap();
        assert_eq!(r.balanced_accuracy, 1.0);
        assert_eq!(r.tp + r.fp + r.tn + r.fn_, 4);
        let r = evaluate_detection(&scores, &labels, f64::INFINITY, MetricWeights::RATING).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (0, 0, 2, 2));
        assert_eq!(r.balanced_accuracy, 0.5);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains(r#""threshold":"inf""#), "{json}");
        assert!(json.contains(r#""fn":2"#));
    }

    proptest! {
        #[test]
        fn shifting_scores_shifts_threshold(
            scores in prop::collection::vec(-100i32..100, 2..40),
            labels in prop::collection::vec(any::<bool>(), 40),
            shift in -1000i32..1000,
        ) {
            let labels = &labels[..scores.len()];
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            // Integer-valued scores keep midpoints exact under the shift.
            let base: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
            let moved: Vec<f64> = base.iter().map(|s| s + f64::from(shift)).collect();
            let a = select_threshold(&base, labels).unwrap();
            let c = select_threshold(&moved, labels).unwrap();
            prop_assert_eq!(a.balanced_accuracy, c.balanced_accuracy);
            prop_assert_eq!(a.threshold + f64::from(shift), c.threshold);
        }
    }
}
