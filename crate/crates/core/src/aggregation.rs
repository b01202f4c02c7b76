//! Rank ensemble and norm-1 mean of several attribution vectors.

use serde::{Deserialize, Serialize};

use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// Sign-disagreement penalty.
    pub lambda: f64,
    /// Floor on both factors under the weight's square root.
    pub eta: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { lambda: 0.15, eta: 1e-12 }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.eta > 0.0) {
            return Err(Error::InvalidConfig("ensemble needs lambda >= 0 and eta > 0".into()));
        }
        Ok(())
    }
}

/// 1-based rank positions of `values` in increasing order under `key`,
/// ties resolved by the lower index first.
fn rank_by(values: &[f64], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let c = values[i].total_cmp(&values[j]);
        (if descending { c.reverse() } else { c }).then(i.cmp(&j))
    });
    let mut ranks = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// Rank 1 goes to the largest `|a_j|`.
pub fn rank_abs(attr: &[f64]) -> Vec<usize> {
    let abs: Vec<f64> = attr.iter().map(|a| a.abs()).collect();
    rank_by(&abs, true)
}

/// `w_j = σ(a) / sqrt(max(|mean(a)|, η) · max(|a_j|, η))`.
pub fn ensemble_weights(attr: &[f64], eta: f64) -> Vec<f64> {
    let sigma = stats::std_dev(attr);
    let mean = stats::mean(attr).abs().max(eta);
    attr.iter().map(|a| sigma / (mean * a.abs().max(eta)).sqrt()).collect()
}

/// Number of methods outside the largest sign group; zero is its own sign.
pub fn sign_disagreement(values: &[f64]) -> usize {
    let pos = values.iter().filter(|v| **v > 0.0).count();
    let neg = values.iter().filter(|v| **v < 0.0).count();
    let zero = values.len() - pos - neg;
    values.len() - pos.max(neg).max(zero)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub a_ens: Vec<f64>,
    /// Rank positions of `a_ens` in increasing order; 1 = most important.
    pub r_ens: Vec<usize>,
    pub n_bar: Vec<usize>,
}

impl Ensemble {
    /// Feature indices from most to least important.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.r_ens.len()).collect();
        idx.sort_by_key(|&j| self.r_ens[j]);
        idx
    }
}

fn check_lengths(attrs: &[&[f64]], min: usize) -> Result<usize> {
    if attrs.len() < min {
        return Err(Error::InvalidConfig(format!("aggregation needs at least {min} vectors, got {}", attrs.len())));
    }
    let m = attrs[0].len();
    for a in attrs {
        if a.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: a.len() });
        }
    }
    Ok(m)
}

/// `a_ens_j = (Σ_l r_lj w_lj / Σ_l w_lj) · (1 + λ n̄_j)`. A feature whose
/// weights all vanish gets `a_ens = +∞`, the worst rank.
pub fn ensemble_aggregate(attrs: &[&[f64]], cfg: &EnsembleConfig) -> Result<Ensemble> {
    let m = check_lengths(attrs, 2)?;
    let ranks: Vec<Vec<usize>> = attrs.iter().map(|a| rank_abs(a)).collect();
    let weights: Vec<Vec<f64>> = attrs.iter().map(|a| ensemble_weights(a, cfg.eta)).collect();
    let mut a_ens = Vec::with_capacity(m);
    let mut n_bar = Vec::with_capacity(m);
    for j in 0..m {
        let signs: Vec<f64> = attrs.iter().map(|a| a[j]).collect();
        let nb = sign_disagreement(&signs);
        let (num, den) = ranks
            .iter()
            .zip(&weights)
            .fold((0.0, 0.0), |(n, d), (r, w)| (n + r[j] as f64 * w[j], d + w[j]));
        let value = if den > 0.0 {
            num / den * (1.0 + cfg.lambda * nb as f64)
        } else {
            log::debug!("ensemble: zero total weight at feature {j}, ranked last");
            f64::INFINITY
        };
        a_ens.push(value);
        n_bar.push(nb);
    }
    let r_ens = rank_by(&a_ens, false);
    Ok(Ensemble { a_ens, r_ens, n_bar })
}

/// Unit-normalize each vector, average, renormalize. Zero vectors are
/// skipped; if nothing survives the result is the zero vector.
pub fn mean_aggregate(attrs: &[&[f64]]) -> Result<Vec<f64>> {
    let m = check_lengths(attrs, 1)?;
    let mut sum = vec![0.0; m];
    for (l, a) in attrs.iter().enumerate() {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            log::debug!("mean aggregation: vector {l} has zero norm, excluded");
            continue;
        }
        for (s, v) in sum.iter_mut().zip(a.iter()) {
            *s += v / norm;
        }
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for s in &mut sum {
            *s /= norm;
        }
    }
    Ok(sum)
}
