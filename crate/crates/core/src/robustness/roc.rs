use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by decreasing threshold, from (0, 0) to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn check(scores: &[f64], agree: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != agree.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), got: agree.len() });
    }
    let n_agree = agree.iter().filter(|a| **a).count();
    let n_disagree = agree.len() - n_agree;
    if n_disagree == 0 {
        return Err(Error::RocUndefined("no disagreement between the models".into()));
    }
    if n_agree == 0 {
        return Err(Error::RocUndefined("no agreement between the models".into()));
    }
    Ok((n_agree, n_disagree))
}

/// ROC of "robust" (score ≥ t) as a detector of model agreement, at the
/// given thresholds plus `+∞`, and the trapezoid AUC over FPR.
pub fn validate_roc_at(scores: &[f64], agree: &[bool], thresholds: &[f64]) -> Result<RocCurve> {
    let (n_agree, n_disagree) = check(scores, agree)?;
    let mut ts: Vec<f64> = thresholds.to_vec();
    ts.push(f64::INFINITY);
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let points: Vec<RocPoint> = ts
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (s, a) in scores.iter().zip(agree) {
                if *s >= t {
                    if *a {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RocPoint { threshold: t, fpr: fp as f64 / n_disagree as f64, tpr: tp as f64 / n_agree as f64 }
        })
        .collect();
    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

/// [`validate_roc_at`] over every distinct score, which makes the curve end
/// at (1, 1) and the AUC equal the pairwise concordance.
pub fn validate_roc(scores: &[f64], agree: &[bool]) -> Result<RocCurve> {
    validate_roc_at(scores, agree, scores)
}

/// `P(s_agree > s_disagree) + P(s_agree = s_disagree) / 2` by exhaustive
/// pair counting.
pub fn pairwise_auc(scores: &[f64], agree: &[bool]) -> Result<f64> {
    let (n_agree, n_disagree) = check(scores, agree)?;
    let mut wins = 0.0;
    for (sa, _) in scores.iter().zip(agree).filter(|(_, a)| **a) {
        for (sd, _) in scores.iter().zip(agree).filter(|(_, a)| !**a) {
            wins += if sa > sd {
                1.0
            } else if sa == sd {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (n_agree * n_disagree) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn perfect_separation() {
        let scores = [1.0, 1.0, 1.0, 0.0, 0.0];
        let agree = [true, true, true, false, false];
        let roc = validate_roc(&scores, &agree).unwrap();
        assert_eq!(roc.auc, 1.0);
        let first = roc.points[0];
        let last = roc.points[roc.points.len() - 1];
        assert_eq!((first.fpr, first.tpr, last.fpr, last.tpr), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn independent_flags_give_half() {
        let mut rng = seed::rng(11);
        let n = 10_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let agree: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        let roc = validate_roc(&scores, &agree).unwrap();
        assert!((roc.auc - 0.5).abs() < 0.02, "{}", roc.auc);
    }

    #[test]
    fn undefined_without_disagreement() {
        assert!(matches!(validate_roc(&[0.5, 0.9], &[true, true]), Err(Error::RocUndefined(_))));
        assert!(matches!(validate_roc(&[0.5, 0.9], &[false, false]), Err(Error::RocUndefined(_))));
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pair_count(seed in 0u64..10_000, n in 2usize..200) {
            let mut rng = seed::rng(seed);
            // coarse scores force ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 20.0).collect();
            let mut agree: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
            agree[0] = true;
            agree[1] = false;
            let roc = validate_roc(&scores, &agree).unwrap();
            prop_assert!((roc.auc - pairwise_auc(&scores, &agree).unwrap()).abs() < 1e-12);
            prop_assert!(roc.points.windows(2).all(|w| w[1].tpr >= w[0].tpr && w[1].fpr >= w[0].fpr));
        }
    }
}
