//! Rank statistics shared by preprocessing and the robustness estimator.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

/// 1-based ranks, tied values share the average of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]].total_cmp(&xs[order[i]]) == Ordering::Equal {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1..=j)
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation, `None` when either input has zero variance.
pub fn pearson(u: &[f64], v: &[f64]) -> Option<f64> {
    let mu = mean(u);
    let mv = mean(v);
    let mut suv = 0.0;
    let mut suu = 0.0;
    let mut svv = 0.0;
    for (a, b) in u.iter().zip(v) {
        let du = a - mu;
        let dv = b - mv;
        suv += du * dv;
        suu += du * du;
        svv += dv * dv;
    }
    if suu == 0.0 || svv == 0.0 {
        return None;
    }
    Some((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Set when at least one input was constant and `rho` is a convention.
    pub degenerate: bool,
}

/// Spearman's rho with average ranks for ties.
///
/// A constant input has no defined correlation. Two constant inputs are
/// rank-identical and score 1; one constant input scores 0. Both cases set
/// `degenerate`.
pub fn spearman(u: &[f64], v: &[f64]) -> Result<Spearman> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    if u.len() < 2 {
        return Err(Error::InsufficientData("spearman needs at least two observations".into()));
    }
    let ru = average_ranks(u);
    let rv = average_ranks(v);
    if ru == rv {
        let constant = ru.iter().all(|r| *r == ru[0]);
        return Ok(Spearman { rho: 1.0, degenerate: constant });
    }
    Ok(match pearson(&ru, &rv) {
        Some(rho) => Spearman { rho, degenerate: false },
        None => {
            let rank_equal = ru == rv;
            Spearman { rho: if rank_equal { 1.0 } else { 0.0 }, degenerate: true }
        }
    })
}

fn entropy_of_counts<'a>(counts: impl Iterator<Item = &'a usize>, n: f64) -> f64 {
    counts
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Shannon entropy (nats) of a categorical sample.
pub fn entropy(xs: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &x in xs {
        *counts.entry(x).or_default() += 1;
    }
    entropy_of_counts(counts.values(), xs.len() as f64)
}

pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
    }
    let h_joint = entropy_of_counts(joint.values(), a.len() as f64);
    (entropy(a) + entropy(b) - h_joint).max(0.0)
}

/// Normalised mutual information with the arithmetic mean of the marginal
/// entropies as denominator. `None` when either variable is constant.
pub fn normalized_mutual_information(a: &[usize], b: &[usize]) -> Option<f64> {
    let ha = entropy(a);
    let hb = entropy(b);
    if ha <= 0.0 || hb <= 0.0 {
        return None;
    }
    Some((mutual_information(a, b) / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_hand_values() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&a, &a).unwrap().rho, 1.0);
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert!((spearman(&a, &rev).unwrap().rho + 1.0).abs() < 1e-15);
        // 1 - 6 * 2 / (5 * 24)
        let b = [1.0, 3.0, 2.0, 4.0, 5.0];
        assert!((spearman(&a, &b).unwrap().rho - 0.9).abs() < 1e-12);
    }

    #[test]
    fn spearman_degenerate_conventions() {
        let c = [2.0, 2.0, 2.0];
        let s = spearman(&c, &c).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.rho, 1.0);
        let s = spearman(&c, &[1.0, 2.0, 3.0]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.rho, 0.0);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn nmi_identical_and_constant() {
        let a = [0, 1, 2, 0, 1, 2, 2];
        assert!((normalized_mutual_information(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        // relabelled copy carries the same information
        let b: Vec<usize> = a.iter().map(|x| 2 - x).collect();
        assert!((normalized_mutual_information(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(normalized_mutual_information(&a, &[1; 7]).is_none());
    }

    proptest! {
        #[test]
        fn spearman_is_symmetric_and_bounded(
            u in prop::collection::vec(-100.0f64..100.0, 2..30),
            seed in 0u64..1000,
        ) {
            let v: Vec<f64> = u.iter().enumerate()
                .map(|(i, x)| (x * 0.37 + (i as f64 + seed as f64).sin() * 50.0).round())
                .collect();
            let a = spearman(&u, &v).unwrap().rho;
            let b = spearman(&v, &u).unwrap().rho;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn nmi_is_symmetric(
            a in prop::collection::vec(0usize..4, 5..60),
            shift in 0usize..5,
        ) {
            let b: Vec<usize> = a.iter().enumerate().map(|(i, x)| (x + i / (shift + 1)) % 3).collect();
            let ab = normalized_mutual_information(&a, &b);
            let ba = normalized_mutual_information(&b, &a);
            match (ab, ba) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "asymmetric degeneracy"),
            }
        }
    }
}
