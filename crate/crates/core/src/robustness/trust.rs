use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrustLabel {
    Robust,
    Uncertain,
    NonRobust,
}

impl TrustLabel {
    pub fn tag(self) -> &'static str {
        match self {
            TrustLabel::Robust => "robust",
            TrustLabel::Uncertain => "uncertain",
            TrustLabel::NonRobust => "non_robust",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trust {
    pub label: TrustLabel,
    pub r_hat: f64,
    pub r_knn: f64,
    pub r_th: f64,
}

/// Robust when both the point and its neighbourhood estimate clear the
/// threshold, Uncertain when only the point does, NonRobust otherwise.
pub fn classify_trust(r_hat: f64, r_knn: f64, r_th: f64) -> Trust {
    let label = match (r_hat >= r_th, r_knn >= r_th) {
        (true, true) => TrustLabel::Robust,
        (true, false) => TrustLabel::Uncertain,
        (false, _) => TrustLabel::NonRobust,
    };
    Trust { label, r_hat, r_knn, r_th }
}

/// 0.05, 0.10, ..., 0.95.
pub fn threshold_sweep() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// Number of Robust points at each threshold of `sweep`.
pub fn robust_fraction_curve(pairs: &[(f64, f64)], sweep: &[f64]) -> Vec<usize> {
    sweep
        .iter()
        .map(|&t| pairs.iter().filter(|(h, k)| classify_trust(*h, *k, t).label == TrustLabel::Robust).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub r_th: f64,
    pub sweep: Vec<f64>,
    pub robust_counts: Vec<usize>,
    /// False when no sign change was found and the default was used.
    pub inflection: bool,
}

/// Default noise floor of the second difference, as a fraction of the points.
pub const DEFAULT_INFLECTION_TOLERANCE: f64 = 0.02;

/// First inflection of the robust-count curve over [`threshold_sweep`]:
/// the first sign change of the discrete second difference. Between the two
/// opposite-signed entries the first zero is chosen if any, otherwise the
/// entry of smaller magnitude. Falls back to 0.80.
///
/// Second differences with magnitude at most `tolerance * pairs.len()` count
/// as zero; `tolerance = 0` is the literal rule.
pub fn select_threshold(pairs: &[(f64, f64)], tolerance: f64) -> ThresholdChoice {
    let sweep = threshold_sweep();
    let counts = robust_fraction_curve(pairs, &sweep);
    let floor = (tolerance.max(0.0) * pairs.len() as f64).floor() as i64;
    let (r_th, inflection) = match first_inflection(&counts, floor) {
        Some(i) => (sweep[i], true),
        None => (DEFAULT_THRESHOLD, false),
    };
    ThresholdChoice { r_th, sweep, robust_counts: counts, inflection }
}

/// Index into `curve` of the first inflection, if any. Second differences
/// with `|d2| <= floor` are treated as zero.
pub fn first_inflection(curve: &[usize], floor: i64) -> Option<usize> {
    if curve.len() < 4 {
        return None;
    }
    // d2[j] belongs to curve index j + 1
    let d2: Vec<i64> = curve
        .windows(3)
        .map(|w| w[2] as i64 - 2 * w[1] as i64 + w[0] as i64)
        .map(|v| if v.abs() <= floor { 0 } else { v })
        .collect();
    let mut last: Option<usize> = None;
    for (j, &v) in d2.iter().enumerate() {
        if v == 0 {
            continue;
        }
        if let Some(p) = last {
            if d2[p].signum() != v.signum() {
                let at = if j > p + 1 {
                    p + 1
                } else if d2[j].abs() < d2[p].abs() {
                    j
                } else {
                    p
                };
                return Some(at + 1);
            }
        }
        last = Some(j);
    }
    None
}
