use serde::{Deserialize, Serialize};

use crate::stats::squared_euclidean;
use crate::{Error, Result};

/// Exact k-nearest-neighbour regressor over encoded points. The prediction
/// is the plain mean of the `k` nearest training scores; at equal distance
/// the lower training index is preferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRegressor {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

/// Training indices ordered by (distance to `x`, index), skipping `skip`.
fn ordered(points: &[Vec<f64>], x: &[f64], skip: Option<usize>) -> Vec<usize> {
    let d: Vec<f64> = points.iter().map(|p| squared_euclidean(p, x)).collect();
    let mut idx: Vec<usize> = (0..points.len()).filter(|&i| Some(i) != skip).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    idx
}

impl KnnRegressor {
    pub fn fit(points: Vec<Vec<f64>>, scores: Vec<f64>, k: usize) -> Result<Self> {
        if points.len() != scores.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: scores.len() });
        }
        if k == 0 || k > points.len() {
            return Err(Error::InvalidConfig(format!("k_R = {k} must be in 1..={}", points.len())));
        }
        if let Some(w) = points.first().map(Vec::len) {
            if let Some(bad) = points.iter().find(|p| p.len() != w) {
                return Err(Error::DimensionMismatch { expected: w, got: bad.len() });
            }
        }
        Ok(Self { k, points, scores })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let w = self.points[0].len();
        if x.len() != w {
            return Err(Error::DimensionMismatch { expected: w, got: x.len() });
        }
        let idx = ordered(&self.points, x, None);
        Ok(idx[..self.k].iter().map(|&i| self.scores[i]).sum::<f64>() / self.k as f64)
    }

    /// Leave-one-out prediction at training point `i`.
    pub fn predict_loo(&self, i: usize) -> Result<f64> {
        if self.k >= self.points.len() {
            return Err(Error::InsufficientData(format!("leave-one-out needs more than k_R = {} points", self.k)));
        }
        let idx = ordered(&self.points, &self.points[i], Some(i));
        Ok(idx[..self.k].iter().map(|&j| self.scores[j]).sum::<f64>() / self.k as f64)
    }
}

/// Summed leave-one-out squared error of the knn regressor for each `k` in
/// `candidates`. Candidates larger than `N - 1` score `+∞`.
pub fn loo_errors(points: &[Vec<f64>], scores: &[f64], candidates: &[usize]) -> Result<Vec<f64>> {
    if points.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: scores.len() });
    }
    let mut errors = vec![0.0; candidates.len()];
    for (i, p) in points.iter().enumerate() {
        let idx = ordered(points, p, Some(i));
        let mut prefix = Vec::with_capacity(idx.len() + 1);
        prefix.push(0.0);
        for &j in &idx {
            prefix.push(prefix.last().unwrap() + scores[j]);
        }
        for (e, &k) in errors.iter_mut().zip(candidates) {
            if k == 0 || k > idx.len() {
                *e = f64::INFINITY;
            } else {
                let r = scores[i] - prefix[k] / k as f64;
                *e += r * r;
            }
        }
    }
    Ok(errors)
}

/// The candidate minimising the leave-one-out error summed over all sets
/// (one per trained model); ties go to the smallest `k`.
pub fn select_k_r(sets: &[(&[Vec<f64>], &[f64])], candidates: &[usize]) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() || sets.is_empty() {
        return Err(Error::InvalidConfig("k_R selection needs candidates and at least one set".into()));
    }
    let mut total = vec![0.0; candidates.len()];
    for (points, scores) in sets {
        for (t, e) in total.iter_mut().zip(loo_errors(points, scores, candidates)?) {
            *t += e;
        }
    }
    let best = (0..candidates.len())
        .filter(|&c| total[c].is_finite())
        .min_by(|&a, &b| total[a].total_cmp(&total[b]).then(candidates[a].cmp(&candidates[b])))
        .ok_or_else(|| Error::InsufficientData("every k_R candidate exceeds the validation size".into()))?;
    Ok((candidates[best], total))
}
