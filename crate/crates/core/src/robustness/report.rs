use std::path::Path;

use serde::{Deserialize, Serialize};

use super::roc::RocCurve;
use super::trust::TrustLabel;
use super::{Explainer, RobustnessScore};
use crate::{Error, Result};

/// One line of a robustness report. `r_knn` and `label` are empty on the
/// validation split, where no trust model exists yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub point_id: usize,
    pub explainer: String,
    pub raw_rho_mean: f64,
    pub r_hat: f64,
    pub r_knn: Option<f64>,
    pub label: Option<String>,
    pub n_kept: usize,
    pub std_error: f64,
}

impl ReportRow {
    pub fn from_score(score: &RobustnessScore, r_knn: Option<f64>, label: Option<TrustLabel>) -> Self {
        Self {
            point_id: score.point_id,
            explainer: score.explainer.tag().to_string(),
            raw_rho_mean: score.raw_mean,
            r_hat: score.r_hat,
            r_knn,
            label: label.map(|l| l.tag().to_string()),
            n_kept: score.n_kept,
            std_error: score.std_error,
        }
    }

    pub fn explainer(&self) -> Result<Explainer> {
        self.explainer.parse()
    }

    pub fn trust_label(&self) -> Option<TrustLabel> {
        match self.label.as_deref() {
            Some("robust") => Some(TrustLabel::Robust),
            Some("uncertain") => Some(TrustLabel::Uncertain),
            Some("non_robust") => Some(TrustLabel::NonRobust),
            _ => None,
        }
    }
}

/// Rows are written sorted by (point id, explainer order).
pub fn write_robustness_csv(path: impl AsRef<Path>, rows: &[ReportRow]) -> Result<()> {
    let mut sorted: Vec<&ReportRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.point_id, r.explainer.parse::<Explainer>().ok()));
    let mut w = csv::Writer::from_path(path)?;
    for r in sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_robustness_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_roc_csv(path: impl AsRef<Path>, curve: &RocCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_sorted() {
        let score = |id, ex| RobustnessScore {
            point_id: id,
            explainer: ex,
            raw_mean: -0.25,
            r_hat: 0.0,
            n_kept: 97,
            std_error: 0.01,
            degenerate: 0,
        };
        let rows = vec![
            ReportRow::from_score(&score(2, Explainer::Mean), Some(0.5), Some(TrustLabel::NonRobust)),
            ReportRow::from_score(&score(1, Explainer::Ensemble), None, None),
            ReportRow::from_score(&score(1, Explainer::Ig), Some(0.9), Some(TrustLabel::Uncertain)),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_robustness_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("point_id,explainer,raw_rho_mean,r_hat,r_knn,label,n_kept,std_error\n1,ig,"));
        let back = read_robustness_csv(&path).unwrap();
        assert_eq!(back, vec![rows[2].clone(), rows[1].clone(), rows[0].clone()]);
        assert_eq!(back[0].trust_label(), Some(TrustLabel::Uncertain));
        assert_eq!(back[1].trust_label(), None);
    }
}
