//! Explanation robustness: the Spearman estimator over a neighbourhood,
//! the knn robustness regressor, trust labels, threshold selection and the
//! model-agreement ROC validation.

mod knn;
mod report;
mod roc;
mod trust;

use serde::{Deserialize, Serialize};

use crate::aggregation::{ensemble_aggregate, mean_aggregate, EnsembleConfig};
use crate::attributions::{explain_all, ExplainConfig, Explanation};
use crate::data::Encoding;
use crate::neighbourhood::Neighbourhood;
use crate::nn::MlpModel;
use crate::stats;
use crate::{Error, Result};

pub use knn::{loo_errors, select_k_r, KnnRegressor};
pub use report::{read_robustness_csv, write_roc_csv, write_robustness_csv, ReportRow};
pub use roc::{pairwise_auc, validate_roc, validate_roc_at, RocCurve, RocPoint};
pub use trust::{
    classify_trust, first_inflection, robust_fraction_curve, select_threshold, threshold_sweep, ThresholdChoice, Trust,
    TrustLabel, DEFAULT_INFLECTION_TOLERANCE, DEFAULT_THRESHOLD,
};

pub use crate::stats::Spearman;

/// Spearman's rho with average ranks; see [`stats::spearman`] for the
/// constant-input convention.
pub fn spearman_rho(u: &[f64], v: &[f64]) -> Result<Spearman> {
    stats::spearman(u, v)
}

/// What is compared between a point and its perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Explainer {
    Ig,
    Deeplift,
    Lrp,
    IgAbs,
    DeepliftAbs,
    LrpAbs,
    Ensemble,
    Mean,
}

impl Explainer {
    pub const ALL: [Explainer; 8] = [
        Explainer::Ig,
        Explainer::Deeplift,
        Explainer::Lrp,
        Explainer::IgAbs,
        Explainer::DeepliftAbs,
        Explainer::LrpAbs,
        Explainer::Ensemble,
        Explainer::Mean,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Explainer::Ig => "ig",
            Explainer::Deeplift => "deeplift",
            Explainer::Lrp => "lrp",
            Explainer::IgAbs => "ig_abs",
            Explainer::DeepliftAbs => "deeplift_abs",
            Explainer::LrpAbs => "lrp_abs",
            Explainer::Ensemble => "ensemble",
            Explainer::Mean => "mean",
        }
    }

    /// The explanation vector compared by rho. The ensemble is compared via
    /// its rank vector `r_ens`, component methods on signed values or on
    /// magnitudes.
    pub fn vector(self, e: &Explanation, ensemble: &EnsembleConfig) -> Result<Vec<f64>> {
        let abs = |v: &[f64]| v.iter().map(|a| a.abs()).collect::<Vec<f64>>();
        Ok(match self {
            Explainer::Ig => e.ig.values.clone(),
            Explainer::Deeplift => e.deeplift.values.clone(),
            Explainer::Lrp => e.lrp.values.clone(),
            Explainer::IgAbs => abs(&e.ig.values),
            Explainer::DeepliftAbs => abs(&e.deeplift.values),
            Explainer::LrpAbs => abs(&e.lrp.values),
            Explainer::Ensemble => {
                ensemble_aggregate(&e.vectors(), ensemble)?.r_ens.into_iter().map(|r| r as f64).collect()
            }
            Explainer::Mean => mean_aggregate(&e.vectors())?,
        })
    }
}

impl std::str::FromStr for Explainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Explainer::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown explainer `{s}`")))
    }
}

impl std::fmt::Display for Explainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessScore {
    pub point_id: usize,
    pub explainer: Explainer,
    /// Mean rho over kept perturbations, in [-1, 1].
    pub raw_mean: f64,
    /// `max(raw_mean, 0)`.
    pub r_hat: f64,
    pub n_kept: usize,
    /// Standard error of the mean rho.
    pub std_error: f64,
    /// Perturbations whose rho fell back to the constant-input convention.
    pub degenerate: usize,
}

/// `R̂ = max(0, mean_k ρ(e(x), e(x̃_k)))`.
pub fn score_from_vectors(point_id: usize, explainer: Explainer, reference: &[f64], perturbed: &[Vec<f64>]) -> Result<RobustnessScore> {
    if perturbed.is_empty() {
        return Err(Error::EmptyNeighbourhood(point_id));
    }
    let mut rhos = Vec::with_capacity(perturbed.len());
    let mut degenerate = 0;
    for p in perturbed {
        let s = spearman_rho(reference, p)?;
        degenerate += usize::from(s.degenerate);
        rhos.push(s.rho);
    }
    let raw_mean = stats::mean(&rhos);
    let std_error = if rhos.len() > 1 {
        let m = raw_mean;
        (rhos.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (rhos.len() - 1) as f64).sqrt() / (rhos.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(RobustnessScore {
        point_id,
        explainer,
        raw_mean,
        r_hat: raw_mean.max(0.0),
        n_kept: perturbed.len(),
        std_error,
        degenerate,
    })
}

/// Explains `x` and every kept perturbation once, then scores each
/// requested explainer.
pub fn estimate_robustness(
    model: &MlpModel,
    x: &[f64],
    neighbourhood: &Neighbourhood,
    encoding: &Encoding,
    explain: &ExplainConfig,
    ensemble: &EnsembleConfig,
    explainers: &[Explainer],
    point_id: usize,
) -> Result<Vec<RobustnessScore>> {
    if neighbourhood.n_kept() == 0 {
        return Err(Error::EmptyNeighbourhood(point_id));
    }
    let base = explain_all(model, x, encoding, explain)?;
    let perturbed = neighbourhood
        .kept_points()
        .map(|p| explain_all(model, p, encoding, explain))
        .collect::<Result<Vec<_>>>()?;
    explainers
        .iter()
        .map(|&ex| {
            let reference = ex.vector(&base, ensemble)?;
            let others = perturbed.iter().map(|e| ex.vector(e, ensemble)).collect::<Result<Vec<_>>>()?;
            score_from_vectors(point_id, ex, &reference, &others)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_examples() {
        let u = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman_rho(&u, &u).unwrap().rho, 1.0);
        let rev: Vec<f64> = u.iter().rev().copied().collect();
        assert!((spearman_rho(&u, &rev).unwrap().rho + 1.0).abs() < 1e-15);
        let swapped = [1.0, 3.0, 2.0, 4.0, 5.0];
        assert!((spearman_rho(&u, &swapped).unwrap().rho - 0.9).abs() < 1e-12);
    }

    #[test]
    fn copies_score_one() {
        let e = vec![0.3, -1.2, 0.8, 0.0];
        let s = score_from_vectors(3, Explainer::Ig, &e, &vec![e.clone(); 10]).unwrap();
        assert_eq!((s.raw_mean, s.r_hat, s.n_kept, s.std_error), (1.0, 1.0, 10, 0.0));
    }

    #[test]
    fn reversed_explanations_clamp_to_zero() {
        let e = vec![1.0, 2.0, 3.0, 4.0];
        let rev = vec![4.0, 3.0, 2.0, 1.0];
        let s = score_from_vectors(0, Explainer::Ig, &e, &vec![rev; 5]).unwrap();
        assert!((s.raw_mean + 1.0).abs() < 1e-12);
        assert_eq!(s.r_hat, 0.0);
    }

    #[test]
    fn one_adjacent_swap_scores_point_nine() {
        let e = vec![5.0, 4.0, 3.0, 2.0, 1.0];
        let p = vec![5.0, 3.0, 4.0, 2.0, 1.0];
        let s = score_from_vectors(0, Explainer::Ensemble, &e, &[p]).unwrap();
        assert!((s.r_hat - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_neighbourhood_is_an_error() {
        assert!(matches!(score_from_vectors(9, Explainer::Ig, &[1.0, 2.0], &[]), Err(Error::EmptyNeighbourhood(9))));
    }

    #[test]
    fn explainer_tags_round_trip() {
        for e in Explainer::ALL {
            assert_eq!(e.tag().parse::<Explainer>().unwrap(), e);
            assert_eq!(serde_json::to_string(&e).unwrap(), format!("\"{}\"", e.tag()));
        }
        assert!("shap".parse::<Explainer>().is_err());
    }
}
