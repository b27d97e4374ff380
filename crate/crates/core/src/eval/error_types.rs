//! Per-error-type subsample analysis.
//!
//! For each error type and each repeat: draw `n_per_type` examples tagged
//! with that type (without replacement), pool them with every faithful
//! example, set the target to 1 for faithful and 0 for sampled errors, and
//! take the Spearman correlation between scores and targets. Results are
//! averaged over repeats.
//!
//! An example tagged with several types is eligible for each of them; the
//! report records how many such overlaps each type's pool has.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::correlation::{correlate, CorrelationKind};
use super::{check_lengths, EvalError};
use crate::dataset::{ErrorType, EvalExample};
use crate::par;

pub const TARGET_INTERPRETATION: &str =
    "spearman(score, target) with target=1 for faithful examples and 0 for sampled error examples";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysisConfig {
    pub n_per_type: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Types to analyse; `None` means every type that occurs in the data.
    pub types: Option<Vec<ErrorType>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTypeResult {
    pub error_type: ErrorType,
    pub mean_spearman: f64,
    pub tagged: usize,
    /// Tagged examples that also carry another error type.
    pub overlap: usize,
    /// Repeats whose correlation was undefined (constant scores); each
    /// contributed 0 to the mean.
    pub degenerate_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTypeReport {
    pub per_type: Vec<ErrorTypeResult>,
    pub faithful_pool: usize,
    pub n_per_type: usize,
    pub repeats: usize,
    pub seed: u64,
    pub target: String,
}

/// Faithful: no error tags and not labelled inconsistent.
fn is_faithful(e: &EvalExample) -> bool {
    e.error_types.is_none() && e.label != Some(0)
}

fn has_type(e: &EvalExample, t: ErrorType) -> bool {
    e.error_types.as_ref().is_some_and(|s| s.contains(&t))
}

fn rng_for(seed: u64, type_index: usize, repeat: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((type_index as u64) << 32) | repeat as u64);
    rng
}

pub fn error_type_analysis(
    examples: &[EvalExample],
    scores: &[f64],
    config: &ErrorAnalysisConfig,
) -> Result<ErrorTypeReport, EvalError> {
    check_lengths(examples.len(), scores.len())?;
    if config.n_per_type == 0 || config.repeats == 0 {
        return Err(EvalError::InvalidInput(
            "n_per_type and repeats must be >= 1".into(),
        ));
    }
    let faithful: Vec<usize> = (0..examples.len())
        .filter(|&i| is_faithful(&examples[i]))
        .collect();
    if faithful.is_empty() {
        return Err(EvalError::EmptyFaithfulPool);
    }

    let types: Vec<ErrorType> = match &config.types {
        Some(t) => t.clone(),
        None => ErrorType::ALL
            .into_iter()
            .filter(|&t| examples.iter().any(|e| has_type(e, t)))
            .collect(),
    };

    let mut pools = Vec::with_capacity(types.len());
    for &t in &types {
        let pool: Vec<usize> = (0..examples.len())
            .filter(|&i| has_type(&examples[i], t))
            .collect();
        if pool.len() < config.n_per_type {
            return Err(EvalError::InsufficientExamples {
                error_type: t,
                have: pool.len(),
                need: config.n_per_type,
            });
        }
        pools.push(pool);
    }

    let jobs = types.len() * config.repeats;
    let outcomes = par::map_range(jobs, |job| {
        let (ti, r) = (job / config.repeats, job % config.repeats);
        let pool = &pools[ti];
        let mut rng = rng_for(config.seed, ti, r);
        let picked = sample(&mut rng, pool.len(), config.n_per_type);

        let mut xs = Vec::with_capacity(faithful.len() + config.n_per_type);
        let mut targets = Vec::with_capacity(xs.capacity());
        for &i in &faithful {
            xs.push(scores[i]);
            targets.push(1.0);
        }
        for k in picked.iter() {
            xs.push(scores[pool[k]]);
            targets.push(0.0);
        }
        correlate(&xs, &targets, CorrelationKind::Spearman)
    });

    let mut per_type = Vec::with_capacity(types.len());
    for (ti, &t) in types.iter().enumerate() {
        let mut total = 0.0;
        let mut degenerate = 0;
        for outcome in &outcomes[ti * config.repeats..(ti + 1) * config.repeats] {
            match outcome {
                Ok(rho) => total += rho,
                Err(EvalError::Degenerate(_)) => degenerate += 1,
                Err(e) => return Err(e.clone()),
            }
        }
        let overlap = pools[ti]
            .iter()
            .filter(|&&i| {
                examples[i]
                    .error_types
                    .as_ref()
                    .is_some_and(|s| s.len() > 1)
            })
            .count();
        per_type.push(ErrorTypeResult {
            error_type: t,
            mean_spearman: total / config.repeats as f64,
            tagged: pools[ti].len(),
            overlap,
            degenerate_repeats: degenerate,
        });
    }

    Ok(ErrorTypeReport {
        per_type,
        faithful_pool: faithful.len(),
        n_per_type: config.n_per_type,
        repeats: config.repeats,
        seed: config.seed,
        target: TARGET_INTERPRETATION.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use std::collections::BTreeSet;

    fn ex(id: usize, types: &[ErrorType]) -> EvalExample {
        EvalExample {
            id: id.to_string(),
            dataset: "t".into(),
            split: Split::Test,
            document: "d".into(),
            summary: "s".into(),
            label: None,
            rating: Some(if types.is_empty() { 1.0 } else { 0.0 }),
            system: None,
            error_types: if types.is_empty() {
                None
            } else {
                Some(types.iter().copied().collect::<BTreeSet<_>>())
            },
        }
    }

    fn fixture() -> (Vec<EvalExample>, Vec<f64>) {
        // 2 faithful (high scores), 5 Sem errors (low scores).
        let mut examples = vec![ex(0, &[]), ex(1, &[])];
        let mut scores = vec![10.0, 11.0];
        for i in 0..5 {
            examples.push(ex(2 + i, &[ErrorType::Sem]));
            scores.push(i as f64);
        }
        (examples, scores)
    }

    fn cfg(n: usize, repeats: usize, seed: u64) -> ErrorAnalysisConfig {
        ErrorAnalysisConfig {
            n_per_type: n,
            repeats,
            seed,
            types: None,
        }
    }

    #[test]
    fn perfect_separation_two_by_two() {
        let (examples, scores) = fixture();
        let rep = error_type_analysis(&examples, &scores, &cfg(2, 10, 1)).unwrap();
        assert_eq!(rep.per_type.len(), 1);
        let r = &rep.per_type[0];
        assert_eq!(r.error_type, ErrorType::Sem);
        assert!(
            (r.mean_spearman - 2.0 / 5f64.sqrt()).abs() < 1e-12,
            "{}",
            r.mean_spearman
        );
        assert_eq!(rep.faithful_pool, 2);
    }

    #[test]
    fn constant_scores_are_flagged_as_zero() {
        let (examples, _) = fixture();
        let scores = vec![1.0; examples.len()];
        let rep = error_type_analysis(&examples, &scores, &cfg(2, 4, 0)).unwrap();
        assert_eq!(rep.per_type[0].mean_spearman, 0.0);
        assert_eq!(rep.per_type[0].degenerate_repeats, 4);
    }

    #[test]
    fn deterministic_in_seed() {
        let (examples, _) = fixture();
        let scores: Vec<f64> = (0..examples.len()).map(|i| ((i * 7) % 5) as f64).collect();
        let a = error_type_analysis(&examples, &scores, &cfg(3, 10, 42)).unwrap();
        let b = error_type_analysis(&examples, &scores, &cfg(3, 10, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_and_empty_pool() {
        let (examples, scores) = fixture();
        assert!(matches!(
            error_type_analysis(&examples, &scores, &cfg(6, 1, 0)),
            Err(EvalError::InsufficientExamples {
                have: 5,
                need: 6,
                ..
            })
        ));
        let only_errors = &examples[2..];
        assert_eq!(
            error_type_analysis(only_errors, &scores[2..], &cfg(1, 1, 0)),
            Err(EvalError::EmptyFaithfulPool)
        );
        let mut explicit = cfg(1, 1, 0);
        explicit.types = Some(vec![ErrorType::Disc]);
        assert!(matches!(
            error_type_analysis(&examples, &scores, &explicit),
            Err(EvalError::InsufficientExamples {
                error_type: ErrorType::Disc,
                ..
            })
        ));
    }

    #[test]
    fn overlap_is_counted() {
        let (mut examples, mut scores) = fixture();
        examples.push(ex(99, &[ErrorType::Sem, ErrorType::CVer]));
        scores.push(0.5);
        let rep = error_type_analysis(&examples, &scores, &cfg(1, 2, 0)).unwrap();
        let sem = rep
            .per_type
            .iter()
            .find(|r| r.error_type == ErrorType::Sem)
            .unwrap();
        let cver = rep
            .per_type
            .iter()
            .find(|r| r.error_type == ErrorType::CVer)
            .unwrap();
        assert_eq!((sem.tagged, sem.overlap), (6, 1));
        assert_eq!((cver.tagged, cver.overlap), (1, 1));
    }
}
