//! Pearson, Spearman (average ranks) and Kendall tau-b, at summary and
//! system level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_finite, check_lengths, EvalError};
use crate::metrics::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
    Kendall,
}

pub fn correlate(x: &[f64], y: &[f64], kind: CorrelationKind) -> Result<f64, EvalError> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(EvalError::Degenerate("need at least 2 observations".into()));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    match kind {
        CorrelationKind::Pearson => pearson(x, y),
        CorrelationKind::Spearman => pearson(&average_ranks(x), &average_ranks(y)),
        CorrelationKind::Kendall => kendall_tau_b(x, y),
    }
}

fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let (mx, my) = (mean(x), mean(y));
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxx = pairwise_sum(&dx.iter().map(|d| d * d).collect::<Vec<_>>());
    let syy = pairwise_sum(&dy.iter().map(|d| d * d).collect::<Vec<_>>());
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Degenerate("zero variance".into()));
    }
    let sxy = pairwise_sum(&dx.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let shared = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = shared;
        }
        i = j;
    }
    ranks
}

/// Number of pairs tied within runs of equal adjacent elements.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `ys` ascending by merge sort, returning the number of strict
/// inversions.
fn count_inversions(ys: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = ys.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        count_inversions(lo, blo) + count_inversions(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if ys[i] <= ys[j] {
            buf[k] = ys[i];
            i += 1;
        } else {
            buf[k] = ys[j];
            swaps += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&ys[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&ys[j..n]);
    ys.copy_from_slice(&buf[..n]);
    swaps
}

/// Knight's O(n log n) tau-b.
fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    // Fold -0.0 into 0.0 so total_cmp orders ties adjacently.
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a + 0.0, b + 0.0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n = pairs.len() as u64;
    let n0 = n * (n - 1) / 2;
    let ties_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let ties_xy = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let discordant = count_inversions(&mut ys, &mut buf);
    let ties_y = tied_pairs(&ys, |a, b| a == b);

    let left = n0 - ties_x;
    let right = n0 - ties_y;
    if left == 0 || right == 0 {
        return Err(EvalError::Degenerate("all values tied".into()));
    }
    // concordant - discordant = n0 - tx - ty + txy - 2·discordant
    let numerator =
        n0 as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * discordant as f64;
    Ok((numerator / (left as f64 * right as f64).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationLevel {
    Summary,
    System,
}

impl std::str::FromStr for CorrelationLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summary" => Ok(CorrelationLevel::Summary),
            "system" => Ok(CorrelationLevel::System),
            other => Err(format!(
                "unknown level {other:?} (expected summary or system)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub score: f64,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    pub level: CorrelationLevel,
    pub n: usize,
    /// The (score, rating) pairs the coefficients were computed from.
    pub points: Vec<CorrelationPoint>,
}

impl CorrelationReport {
    fn from_points(
        level: CorrelationLevel,
        points: Vec<CorrelationPoint>,
    ) -> Result<Self, EvalError> {
        let scores: Vec<f64> = points.iter().map(|p| p.score).collect();
        let ratings: Vec<f64> = points.iter().map(|p| p.rating).collect();
        Ok(Self {
            pearson: correlate(&scores, &ratings, CorrelationKind::Pearson)?,
            spearman: correlate(&scores, &ratings, CorrelationKind::Spearman)?,
            kendall: correlate(&scores, &ratings, CorrelationKind::Kendall)?,
            level,
            n: points.len(),
            points,
        })
    }

    pub fn coefficient(&self, kind: CorrelationKind) -> f64 {
        match kind {
            CorrelationKind::Pearson => self.pearson,
            CorrelationKind::Spearman => self.spearman,
            CorrelationKind::Kendall => self.kendall,
        }
    }
}

pub fn summary_level_report(
    scores: &[f64],
    ratings: &[f64],
) -> Result<CorrelationReport, EvalError> {
    check_lengths(scores.len(), ratings.len())?;
    let points = scores
        .iter()
        .zip(ratings)
        .map(|(&score, &rating)| CorrelationPoint {
            system: None,
            score,
            rating,
        })
        .collect();
    CorrelationReport::from_points(CorrelationLevel::Summary, points)
}

/// Correlates per-system mean scores with per-system mean ratings. Systems
/// are ordered by id.
pub fn system_level_report(
    systems: &[Option<String>],
    scores: &[f64],
    ratings: &[f64],
) -> Result<CorrelationReport, EvalError> {
    check_lengths(systems.len(), scores.len())?;
    check_lengths(scores.len(), ratings.len())?;
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (index, system) in systems.iter().enumerate() {
        let system = system
            .as_deref()
            .ok_or(EvalError::MissingSystemId { index })?;
        let entry = groups.entry(system).or_default();
        entry.0.push(scores[index]);
        entry.1.push(ratings[index]);
    }
    if groups.len() < 2 {
        return Err(EvalError::TooFewSystems(groups.len()));
    }
    let points = groups
        .into_iter()
        .map(|(system, (s, r))| CorrelationPoint {
            system: Some(system.to_owned()),
            score: mean(&s),
            rating: mean(&r),
        })
        .collect();
    CorrelationReport::from_points(CorrelationLevel::System, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn examples() {
        let p = correlate(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], CorrelationKind::Pearson).unwrap();
        assert!((p - 1.0).abs() < TOL);
        let s = correlate(
            &[1.0, 2.0, 3.0],
            &[3.0, 1.0, 2.0],
            CorrelationKind::Spearman,
        )
        .unwrap();
        assert!((s + 0.5).abs() < TOL);
        let k = correlate(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], CorrelationKind::Kendall).unwrap();
        assert!((k + 1.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn ranks_share_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 30.0]),
            vec![1.5, 3.0, 1.5, 4.0]
        );
        assert_eq!(
            average_ranks(&[0.0, 0.0, 1.0, 1.0]),
            vec![1.5, 1.5, 3.5, 3.5]
        );
    }

    #[test]
    fn tied_spearman_matches_hand_value() {
        let s = correlate(
            &[1.0, 2.0, 3.0, 4.0],
            &[0.0, 0.0, 1.0, 1.0],
            CorrelationKind::Spearman,
        )
        .unwrap();
        assert!((s - 2.0 / 5f64.sqrt()).abs() < TOL);
    }

    #[test]
    fn kendall_tau_b_with_ties() {
        // x ties (1,1); y ties (b,c). Pairs: (a,b) C, (a,c) C, (a,d) C,
        // (b,c) tie in both, (b,d) C, (c,d) C → 5 concordant, 0 discordant.
        // n0=6, tx=1, ty=1: tau_b = 5 / sqrt(5·5) = 1.
        let k = correlate(
            &[0.0, 1.0, 1.0, 2.0],
            &[0.0, 1.0, 1.0, 2.0],
            CorrelationKind::Kendall,
        )
        .unwrap();
        assert!((k - 1.0).abs() < TOL);
        // Signed zeros are ties.
        let k = correlate(
            &[-0.0, 0.0, 1.0],
            &[1.0, 0.0, 2.0],
            CorrelationKind::Kendall,
        )
        .unwrap();
        let k2 = correlate(&[0.0, 0.0, 1.0], &[1.0, 0.0, 2.0], CorrelationKind::Kendall).unwrap();
        assert_eq!(k, k2);
    }

    #[test]
    fn degenerate_inputs() {
        for kind in [
            CorrelationKind::Pearson,
            CorrelationKind::Spearman,
            CorrelationKind::Kendall,
        ] {
            assert!(matches!(
                correlate(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], kind),
                Err(EvalError::Degenerate(_))
            ));
            assert!(matches!(
                correlate(&[1.0], &[1.0], kind),
                Err(EvalError::Degenerate(_))
            ));
            assert!(matches!(
                correlate(&[1.0, 2.0], &[1.0], kind),
                Err(EvalError::LengthMismatch { .. })
            ));
        }
    }

    #[test]
    fn summary_level() {
        let r = [1.0, 3.0, 2.0, 5.0, 4.0];
        let rep = summary_level_report(&r, &r).unwrap();
        assert_eq!((rep.pearson, rep.spearman, rep.kendall), (1.0, 1.0, 1.0));
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        assert!((summary_level_report(&neg, &r).unwrap().pearson + 1.0).abs() < TOL);
        assert_eq!(rep.level, CorrelationLevel::Summary);
        assert_eq!(rep.n, 5);
    }

    #[test]
    fn system_level_two_systems() {
        let systems = vec![
            Some("a".into()),
            Some("b".into()),
            Some("a".into()),
            Some("b".into()),
        ];
        let scores = [0.1, 0.9, 0.3, 0.5];
        let ratings = [1.0, 4.0, 2.0, 3.0];
        let rep = system_level_report(&systems, &scores, &ratings).unwrap();
        assert_eq!(rep.n, 2);
        assert_eq!(rep.spearman, 1.0);
        assert_eq!(rep.points[0].system.as_deref(), Some("a"));
        assert!((rep.points[0].score - 0.2).abs() < TOL);
    }

    #[test]
    fn system_level_errors() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let ratings = [1.0, 2.0, 3.0, 4.0];
        let two = vec![
            Some("a".into()),
            Some("a".into()),
            Some("b".into()),
            Some("b".into()),
        ];
        assert!(matches!(
            system_level_report(&two, &scores, &ratings),
            Err(EvalError::Degenerate(_))
        ));
        let one = vec![Some("a".to_string()); 4];
        assert_eq!(
            system_level_report(&one, &ratings, &ratings),
            Err(EvalError::TooFewSystems(1))
        );
        let missing = vec![Some("a".into()), None, Some("b".into()), Some("b".into())];
        assert_eq!(
            system_level_report(&missing, &ratings, &ratings),
            Err(EvalError::MissingSystemId { index: 1 })
        );
    }

    #[test]
    fn sixteen_systems() {
        let mut systems = Vec::new();
        let mut scores = Vec::new();
        let mut ratings = Vec::new();
        for s in 0..16 {
            for e in 0..100 {
                systems.push(Some(format!("sys{s:02}")));
                scores.push(s as f64 + (e % 7) as f64 * 0.01);
                ratings.push((s * 3 % 16) as f64 + (e % 5) as f64 * 0.1);
            }
        }
        assert_eq!(
            system_level_report(&systems, &scores, &ratings).unwrap().n,
            16
        );
    }

    proptest! {
        #[test]
        fn rank_coefficients_survive_monotone_transforms(
            x in prop::collection::vec(-3.0f64..3.0, 3..40),
            y in prop::collection::vec(-3.0f64..3.0, 40),
        ) {
            let y = &y[..x.len()];
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            for kind in [CorrelationKind::Spearman, CorrelationKind::Kendall] {
                match (correlate(&x, y, kind), correlate(&ex, y, kind)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }
    }
}
