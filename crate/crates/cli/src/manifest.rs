//! Artifact layout of a run directory and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robustcheck_core::neighbourhood::Scheme;
use robustcheck_core::robustness::Explainer;

use crate::config::RunConfig;
use crate::error::{CliError, StageContext};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Paths of every artifact, relative to the run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn config() -> &'static str {
        "config.resolved.json"
    }
    pub fn raw() -> &'static str {
        "data/raw.csv"
    }
    pub fn encoding() -> &'static str {
        "data/encoding.json"
    }
    pub fn split(name: &str) -> String {
        format!("data/{name}.csv")
    }
    pub fn model(m: usize) -> String {
        format!("models/model_{m}.json")
    }
    pub fn train_report() -> &'static str {
        "models/train_report.json"
    }
    pub fn index() -> &'static str {
        "index/medoids.json"
    }
    pub fn tuning(m: usize, s: Scheme) -> String {
        format!("valid/tuning_m{m}_{}.json", s.name())
    }
    pub fn robustness(split: &str, m: usize, s: Scheme) -> String {
        format!("{split}/robustness_m{m}_{}.csv", s.name())
    }
    pub fn neighbourhoods(split: &str, m: usize, s: Scheme) -> String {
        format!("{split}/neighbourhoods_m{m}_{}.csv", s.name())
    }
    pub fn trust(s: Scheme) -> String {
        format!("trust/trust_{}.json", s.name())
    }
    pub fn trust_summary() -> &'static str {
        "test/trust_summary.csv"
    }
    pub fn agreement() -> &'static str {
        "validate/agreement.csv"
    }
    pub fn roc(m: usize, s: Scheme, e: Explainer) -> String {
        format!("validate/roc_m{m}_{}_{}.csv", s.name(), e.tag())
    }
    pub fn auc_summary() -> &'static str {
        "validate/auc_summary.csv"
    }
    pub fn label_agreement() -> &'static str {
        "validate/label_agreement.csv"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_clock_secs: f64,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    /// Loads the manifest of `layout`, or starts a new one when it is absent
    /// or was written for a different configuration.
    pub fn open(layout: &Layout, config: &RunConfig) -> Self {
        let fresh = || RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            stages: BTreeMap::new(),
        };
        match std::fs::read_to_string(layout.path(MANIFEST_FILE)) {
            Ok(text) => match serde_json::from_str::<RunManifest>(&text) {
                Ok(m) if m.config == *config => m,
                _ => fresh(),
            },
            Err(_) => fresh(),
        }
    }

    pub fn record(
        &mut self,
        layout: &Layout,
        stage: &'static str,
        secs: f64,
        artifacts: &[String],
    ) -> Result<(), CliError> {
        let artifacts = artifacts
            .iter()
            .map(|rel| {
                sha256_file(&layout.path(rel)).map(|sha256| ArtifactRecord { path: rel.clone(), sha256 })
            })
            .collect::<std::io::Result<Vec<_>>>()
            .stage(stage)?;
        self.stages.insert(stage.to_string(), StageRecord { wall_clock_secs: secs, artifacts });
        let text = serde_json::to_string_pretty(self).stage(stage)?;
        std::fs::write(layout.path(MANIFEST_FILE), text).stage(stage)
    }

    /// Every recorded artifact exists and still matches its hash.
    pub fn verify(&self, layout: &Layout) -> Vec<String> {
        let mut problems = Vec::new();
        for (stage, rec) in &self.stages {
            for a in &rec.artifacts {
                match sha256_file(&layout.path(&a.path)) {
                    Ok(h) if h == a.sha256 => {}
                    Ok(_) => problems.push(format!("{stage}: {} changed", a.path)),
                    Err(_) => problems.push(format!("{stage}: {} missing", a.path)),
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_string() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn record_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let layout = Layout::new(dir.path());
        std::fs::write(layout.path("a.txt"), "x").unwrap();
        let cfg = RunConfig::default();
        let mut m = RunManifest::open(&layout, &cfg);
        m.record(&layout, "train", 0.5, &["a.txt".into()]).unwrap();
        let again = RunManifest::open(&layout, &cfg);
        assert_eq!(again.stages.len(), 1);
        assert!(again.verify(&layout).is_empty());
        std::fs::write(layout.path("a.txt"), "y").unwrap();
        assert_eq!(again.verify(&layout).len(), 1);
        let other = RunConfig { seed: 1, ..RunConfig::default() };
        assert!(RunManifest::open(&layout, &other).stages.is_empty());
    }
}
