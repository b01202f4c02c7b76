//! The pipeline stages. Each reads its upstream artifacts from the run
//! directory, writes its own and records them in the manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use robustcheck_core::data::{
    self, read_dataset_csv, synthetic, write_dataset_csv, Encoding, FeatureSchema, PreprocessedDataset, SplitSpec,
};
use robustcheck_core::neighbourhood::{
    build_neighbourhood, fit_medoids_k, medoid_count, tune_hyperparams, write_neighbourhoods_csv, Candidate,
    MedoidConfig, MedoidIndex, Neighbourhood, RandomConfig, Scheme, TuneGrid, TuneOutcome,
};
use robustcheck_core::nn::{self, MlpModel, TrainConfig};
use robustcheck_core::robustness::{
    classify_trust, estimate_robustness, read_robustness_csv, select_k_r, select_threshold, validate_roc,
    write_robustness_csv, write_roc_csv, Explainer, KnnRegressor, ReportRow, RobustnessScore, ThresholdChoice,
    TrustLabel,
};
use robustcheck_core::{seed, Error as CoreError};

use crate::config::{DatasetSource, RunConfig};
use crate::error::{CliError, StageContext};
use crate::manifest::{Layout, RunManifest};

pub const THREADS_ENV: &str = "ROBUSTCHECK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Preprocess,
    Train,
    Index,
    RobustnessValid,
    FitTrust,
    AssessTest,
    Validate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Preprocess,
        Stage::Train,
        Stage::Index,
        Stage::RobustnessValid,
        Stage::FitTrust,
        Stage::AssessTest,
        Stage::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Index => "index",
            Stage::RobustnessValid => "robustness-valid",
            Stage::FitTrust => "fit-trust",
            Stage::AssessTest => "assess-test",
            Stage::Validate => "validate",
        }
    }
}

const MODELS: [usize; 3] = [1, 2, 3];

/// Per-model training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: usize,
    pub hidden_dims: Vec<usize>,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
    pub test_accuracy: f64,
}

/// The generator configuration used for one (model, scheme), with the grid
/// search that produced it when tuning is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub model: usize,
    pub scheme: Scheme,
    pub chosen: Candidate,
    pub outcome: Option<TuneOutcome>,
}

/// The knn regressor of one model: scores at the validation points listed
/// by id; the points themselves live in the validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTrust {
    pub model: usize,
    pub r_th: f64,
    pub threshold: Option<ThresholdChoice>,
    pub point_ids: Vec<usize>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustEntry {
    pub explainer: Explainer,
    pub k_r: usize,
    /// Leave-one-out error per candidate, summed over the three models.
    pub loo_errors: Option<Vec<(usize, f64)>>,
    pub models: Vec<ModelTrust>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustFile {
    pub scheme: Scheme,
    pub entries: Vec<TrustEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustSummaryRow {
    pub model: usize,
    pub neighbourhood: String,
    pub explainer: String,
    pub r_th: f64,
    pub k_r: usize,
    pub points: usize,
    pub robust_pct: f64,
    pub uncertain_pct: f64,
    pub non_robust_pct: f64,
    pub mean_r_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub point_id: usize,
    pub model_1: usize,
    pub model_2: usize,
    pub model_3: usize,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub model: usize,
    pub neighbourhood: String,
    pub explainer: String,
    pub auc: Option<f64>,
    pub status: String,
    pub n_agree: usize,
    pub n_disagree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAgreementRow {
    pub model: usize,
    pub neighbourhood: String,
    pub explainer: String,
    pub label: String,
    pub points: usize,
    pub disagree: usize,
    pub disagree_fraction: Option<f64>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    layout: Layout,
    pool: rayon::ThreadPool,
    stage: &'static str,
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn write_csv<T: Serialize>(path: PathBuf, rows: &[T]) -> Result<(), CoreError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CoreError> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: PathBuf) -> Result<T, CoreError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn accuracy(model: &MlpModel, ds: &PreprocessedDataset) -> Result<f64, CoreError> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for (x, y) in ds.x.iter().zip(&ds.y) {
        hits += usize::from(model.predict_class(x)? == *y);
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Dataset rows reordered by point id.
fn sorted_by_id(ds: PreprocessedDataset) -> PreprocessedDataset {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.sort_by_key(|&i| ds.row_ids[i]);
    PreprocessedDataset {
        x: idx.iter().map(|&i| ds.x[i].clone()).collect(),
        y: idx.iter().map(|&i| ds.y[i]).collect(),
        row_ids: idx.iter().map(|&i| ds.row_ids[i]).collect(),
    }
}

impl<'a> Ctx<'a> {
    fn require(&self, rel: &str, needs: &'static str) -> Result<PathBuf, CliError> {
        let p = self.layout.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::MissingArtifact { stage: self.stage, needs, path: p })
        }
    }

    fn mkdir(&self, rel: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(self.layout.path(rel)).stage(self.stage)
    }

    fn stream(&self, name: &str) -> u64 {
        seed::derive(self.cfg.seed, name)
    }

    fn encoding(&self) -> Result<Encoding, CliError> {
        Encoding::load(self.require(Layout::encoding(), "preprocess")?).stage(self.stage)
    }

    fn split(&self, name: &str, encoding: &Encoding) -> Result<PreprocessedDataset, CliError> {
        let p = self.require(&Layout::split(name), "preprocess")?;
        read_dataset_csv(p, encoding).map(sorted_by_id).stage(self.stage)
    }

    fn model(&self, m: usize) -> Result<MlpModel, CliError> {
        nn::load_model(self.require(&Layout::model(m), "train")?).stage(self.stage)
    }

    fn load_index(&self, scheme: Scheme) -> Result<Option<MedoidIndex>, CliError> {
        match scheme {
            Scheme::Random => Ok(None),
            Scheme::Medoid => MedoidIndex::load(self.require(Layout::index(), "index")?).map(Some).stage(self.stage),
        }
    }

    fn preprocess(&self) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        self.mkdir("data")?;
        let mut out = Vec::new();
        let raw = match &self.cfg.dataset {
            DatasetSource::Csv { path, schema } => {
                let schema = FeatureSchema::load(schema).stage(st)?;
                data::load_csv(path, &schema).stage(st)?
            }
            DatasetSource::Synthetic { name, rows, seed } => {
                let t = synthetic::by_name(name, *rows, seed.unwrap_or_else(|| self.stream("data"))).stage(st)?;
                synthetic::write_table_csv(&t, self.layout.path(Layout::raw())).stage(st)?;
                std::fs::write(self.layout.path("data/schema.json"), t.schema.to_json()).stage(st)?;
                out.push(Layout::raw().to_string());
                out.push("data/schema.json".to_string());
                t
            }
        };
        let spec = SplitSpec { sizes: self.cfg.split, seed: self.stream("split") };
        let splits = data::preprocess(&raw, &spec, &self.cfg.preprocess).stage(st)?;
        for d in &splits.encoding.dropped {
            log::info!("dropped feature `{}`: {:?}", d.name, d.reason);
        }
        splits.encoding.save(self.layout.path(Layout::encoding())).stage(st)?;
        out.push(Layout::encoding().to_string());
        for (name, ds) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)] {
            if ds.is_empty() {
                return Err(CliError::Config(format!("the {name} split is empty")));
            }
            write_dataset_csv(ds, &splits.encoding, self.layout.path(Layout::split(name))).stage(st)?;
            out.push(Layout::split(name));
        }
        log::info!(
            "preprocess: {} train / {} valid / {} test rows, {} encoded columns",
            splits.train.len(),
            splits.valid.len(),
            splits.test.len(),
            splits.encoding.width()
        );
        Ok(out)
    }

    fn train(&self) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        let encoding = self.encoding()?;
        let (train, valid, test) =
            (self.split("train", &encoding)?, self.split("valid", &encoding)?, self.split("test", &encoding)?);
        self.mkdir("models")?;
        let classes = encoding.classes.len();
        let trained = self.pool.install(|| {
            MODELS
                .par_iter()
                .map(|&m| {
                    let cfg = TrainConfig { seed: self.stream(&format!("train/model_{m}")), ..self.cfg.models[m - 1].clone() };
                    nn::train(&train.x, &train.y, classes, &cfg).map(|(model, report)| (m, cfg, model, report))
                })
                .collect::<Result<Vec<_>, _>>()
        });
        let mut out = Vec::new();
        let mut summary = Vec::new();
        for (m, cfg, model, report) in trained.stage(st)? {
            nn::save_model(&model, self.layout.path(Layout::model(m))).stage(st)?;
            out.push(Layout::model(m));
            let s = ModelSummary {
                model: m,
                hidden_dims: cfg.hidden_dims,
                final_loss: report.final_loss,
                train_accuracy: report.train_accuracy,
                valid_accuracy: accuracy(&model, &valid).stage(st)?,
                test_accuracy: accuracy(&model, &test).stage(st)?,
            };
            log::info!("model {m}: train acc {:.4}, test acc {:.4}", s.train_accuracy, s.test_accuracy);
            summary.push(s);
        }
        write_json(self.layout.path(Layout::train_report()), &summary).stage(st)?;
        out.push(Layout::train_report().to_string());
        Ok(out)
    }

    fn fit_index(&self) -> Result<Vec<String>, CliError> {
        if !self.cfg.schemes().contains(&Scheme::Medoid) {
            log::info!("index: medoid scheme not requested, nothing to do");
            return Ok(Vec::new());
        }
        let st = self.stage;
        let encoding = self.encoding()?;
        let valid = self.split("valid", &encoding)?;
        let nb = &self.cfg.neighbourhood;
        let k = nb.k_medoids.unwrap_or_else(|| medoid_count(valid.len(), nb.n_k));
        let index = fit_medoids_k(&valid.x, k, nb.n_k, self.stream("medoids")).stage(st)?;
        log::info!("index: {} medoids over {} points, cost {:.4}", index.k(), valid.len(), index.cost);
        self.mkdir("index")?;
        index.save(self.layout.path(Layout::index())).stage(st)?;
        Ok(vec![Layout::index().to_string()])
    }

    fn tune(&self, m: usize, scheme: Scheme, model: &MlpModel, valid: &PreprocessedDataset, encoding: &Encoding, index: Option<&MedoidIndex>) -> Result<TuningRecord, CliError> {
        let nb = &self.cfg.neighbourhood;
        if !nb.tune {
            let chosen = match scheme {
                Scheme::Random => Candidate::Random(RandomConfig { n: nb.n, ..nb.random }),
                Scheme::Medoid => Candidate::Medoid(MedoidConfig { n: nb.n, ..nb.medoid }),
            };
            return Ok(TuningRecord { model: m, scheme, chosen, outcome: None });
        }
        let grid = match scheme {
            Scheme::Random => TuneGrid::Random(nb.random_grid.clone()),
            Scheme::Medoid => TuneGrid::Medoid(nb.medoid_grid.clone()),
        };
        let sample = &valid.x[..nb.tune_sample.min(valid.len())];
        let stream = self.stream(&format!("tune/model_{m}/{}", scheme.name()));
        let outcome =
            tune_hyperparams(model, sample, encoding, &grid, index, nb.n, nb.retention_target, stream).stage(self.stage)?;
        log::info!(
            "model {m} {}: tuned {:?} (retention {:.4})",
            scheme.name(),
            outcome.best(),
            outcome.mean_retention[outcome.chosen]
        );
        Ok(TuningRecord { model: m, scheme, chosen: outcome.best(), outcome: Some(outcome) })
    }

    /// Neighbourhoods and robustness scores for every point of `ds`, in
    /// point-id order.
    #[allow(clippy::too_many_arguments)]
    fn score_split(
        &self,
        split: &str,
        m: usize,
        model: &MlpModel,
        ds: &PreprocessedDataset,
        encoding: &Encoding,
        chosen: &Candidate,
        index: Option<&MedoidIndex>,
    ) -> Result<Vec<(Vec<RobustnessScore>, Neighbourhood)>, CliError> {
        let generator = chosen.generator(index).stage(self.stage)?;
        let stream = self.stream(&format!("neighbourhood/{split}/model_{m}/{}", generator.scheme().name()));
        let explainers = self.cfg.resolved_explainers();
        let cfg = self.cfg;
        self.pool
            .install(|| {
                ds.x.par_iter()
                    .zip(&ds.row_ids)
                    .map(|(x, &id)| {
                        let g = generator.with_seed(seed::derive_indexed(stream, id as u64));
                        let nb = build_neighbourhood(model, x, encoding, &g)?;
                        let scores = estimate_robustness(model, x, &nb, encoding, &cfg.explain, &cfg.ensemble, &explainers, id)?;
                        Ok((scores, nb))
                    })
                    .collect::<Result<Vec<_>, CoreError>>()
            })
            .stage(self.stage)
    }

    fn robustness_valid(&self) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        let encoding = self.encoding()?;
        let valid = self.split("valid", &encoding)?;
        self.mkdir("valid")?;
        let mut out = Vec::new();
        for m in MODELS {
            let model = self.model(m)?;
            for scheme in self.cfg.schemes() {
                let index = self.load_index(scheme)?;
                let tuning = self.tune(m, scheme, &model, &valid, &encoding, index.as_ref())?;
                write_json(self.layout.path(Layout::tuning(m, scheme)), &tuning).stage(st)?;
                out.push(Layout::tuning(m, scheme));
                let results = self.score_split("valid", m, &model, &valid, &encoding, &tuning.chosen, index.as_ref())?;
                out.extend(self.write_scores("valid", m, scheme, &encoding, &results, |_| (None, None))?);
            }
        }
        Ok(out)
    }

    fn write_scores(
        &self,
        split: &str,
        m: usize,
        scheme: Scheme,
        encoding: &Encoding,
        results: &[(Vec<RobustnessScore>, Neighbourhood)],
        trust: impl Fn(&RobustnessScore) -> (Option<f64>, Option<TrustLabel>),
    ) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        let rows: Vec<ReportRow> = results
            .iter()
            .flat_map(|(scores, _)| scores.iter())
            .map(|s| {
                let (r_knn, label) = trust(s);
                ReportRow::from_score(s, r_knn, label)
            })
            .collect();
        let retention = results.iter().map(|(_, nb)| nb.retention).sum::<f64>() / results.len().max(1) as f64;
        let retries = results.iter().filter(|(_, nb)| nb.attempts > 1).count();
        log::info!("{split} model {m} {}: mean retention {retention:.4}, {retries} regenerated", scheme.name());
        let mut out = vec![Layout::robustness(split, m, scheme)];
        write_robustness_csv(self.layout.path(&out[0]), &rows).stage(st)?;
        if self.cfg.neighbourhood.write_neighbourhoods {
            let rel = Layout::neighbourhoods(split, m, scheme);
            let ids = results.iter().map(|(s, nb)| (s[0].point_id, nb));
            write_neighbourhoods_csv(self.layout.path(&rel), encoding, ids).stage(st)?;
            out.push(rel);
        }
        Ok(out)
    }

    /// Robustness rows of one split grouped by explainer, each in point-id
    /// order.
    fn read_scores(&self, split: &str, m: usize, scheme: Scheme, needs: &'static str) -> Result<BTreeMap<Explainer, Vec<ReportRow>>, CliError> {
        let rows = read_robustness_csv(self.require(&Layout::robustness(split, m, scheme), needs)?).stage(self.stage)?;
        let mut by: BTreeMap<Explainer, Vec<ReportRow>> = BTreeMap::new();
        for r in rows {
            by.entry(r.explainer().stage(self.stage)?).or_default().push(r);
        }
        for v in by.values_mut() {
            v.sort_by_key(|r| r.point_id);
        }
        Ok(by)
    }

    fn fit_trust(&self) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        let encoding = self.encoding()?;
        let valid = self.split("valid", &encoding)?;
        self.mkdir("trust")?;
        let mut out = Vec::new();
        for scheme in self.cfg.schemes() {
            let per_model = MODELS
                .iter()
                .map(|&m| self.read_scores("valid", m, scheme, "robustness-valid"))
                .collect::<Result<Vec<_>, _>>()?;
            let mut entries = Vec::new();
            for explainer in self.cfg.resolved_explainers() {
                let sets = per_model
                    .iter()
                    .map(|by| {
                        let rows = by.get(&explainer).ok_or_else(|| {
                            CliError::Config(format!("no validation scores for `{explainer}`; rerun robustness-valid"))
                        })?;
                        if rows.iter().map(|r| r.point_id).ne(valid.row_ids.iter().copied()) {
                            return Err(CliError::Config("validation scores do not match the validation split; rerun robustness-valid".into()));
                        }
                        Ok(rows.iter().map(|r| r.r_hat).collect::<Vec<f64>>())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let t = &self.cfg.trust;
                let (k_r, loo_errors) = match t.k_r {
                    Some(k) => (k, None),
                    None => {
                        let refs: Vec<(&[Vec<f64>], &[f64])> = sets.iter().map(|s| (valid.x.as_slice(), s.as_slice())).collect();
                        let (k, errs) = select_k_r(&refs, &t.k_r_candidates).stage(st)?;
                        (k, Some(t.k_r_candidates.iter().copied().zip(errs).collect()))
                    }
                };
                let mut models = Vec::new();
                for (m, scores) in MODELS.iter().zip(sets) {
                    let knn = KnnRegressor::fit(valid.x.clone(), scores.clone(), k_r).stage(st)?;
                    let (r_th, threshold) = match t.r_th {
                        Some(r) => (r, None),
                        None => {
                            let pairs = (0..scores.len())
                                .map(|i| knn.predict_loo(i).map(|p| (scores[i], p)))
                                .collect::<Result<Vec<_>, _>>()
                                .stage(st)?;
                            let c = select_threshold(&pairs, t.inflection_tolerance);
                            (c.r_th, Some(c))
                        }
                    };
                    log::info!("{} {explainer} model {m}: k_R = {k_r}, r_th = {r_th}", scheme.name());
                    models.push(ModelTrust { model: *m, r_th, threshold, point_ids: valid.row_ids.clone(), scores });
                }
                entries.push(TrustEntry { explainer, k_r, loo_errors, models });
            }
            write_json(self.layout.path(Layout::trust(scheme)), &TrustFile { scheme, entries }).stage(st)?;
            out.push(Layout::trust(scheme));
        }
        Ok(out)
    }

    fn assess_test(&self) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        let encoding = self.encoding()?;
        let valid = self.split("valid", &encoding)?;
        let test = self.split("test", &encoding)?;
        self.mkdir("test")?;
        let mut out = Vec::new();
        let mut summary = Vec::new();
        for scheme in self.cfg.schemes() {
            let trust: TrustFile = read_json(self.require(&Layout::trust(scheme), "fit-trust")?).stage(st)?;
            let index = self.load_index(scheme)?;
            for m in MODELS {
                let model = self.model(m)?;
                let tuning: TuningRecord =
                    read_json(self.require(&Layout::tuning(m, scheme), "robustness-valid")?).stage(st)?;
                let mut knn = BTreeMap::new();
                for e in &trust.entries {
                    let mt = e.models.iter().find(|t| t.model == m).ok_or_else(|| {
                        CliError::Config(format!("trust file lacks model {m}; rerun fit-trust"))
                    })?;
                    if mt.point_ids != valid.row_ids {
                        return Err(CliError::Config("trust model does not match the validation split; rerun fit-trust".into()));
                    }
                    let reg = KnnRegressor::fit(valid.x.clone(), mt.scores.clone(), e.k_r).stage(st)?;
                    knn.insert(e.explainer, (reg, mt.r_th, e.k_r));
                }
                for ex in self.cfg.resolved_explainers() {
                    if !knn.contains_key(&ex) {
                        return Err(CliError::Config(format!("no trust model for `{ex}`; rerun fit-trust")));
                    }
                }
                let results = self.score_split("test", m, &model, &test, &encoding, &tuning.chosen, index.as_ref())?;
                let x_by_id: BTreeMap<usize, &Vec<f64>> = test.row_ids.iter().copied().zip(&test.x).collect();
                let mut failure = None;
                let labelled = |s: &RobustnessScore| {
                    let (reg, r_th, _) = &knn[&s.explainer];
                    match reg.predict(x_by_id[&s.point_id]) {
                        Ok(r_knn) => (Some(r_knn), Some(classify_trust(s.r_hat, r_knn, *r_th).label)),
                        Err(_) => (None, None),
                    }
                };
                out.extend(self.write_scores("test", m, scheme, &encoding, &results, labelled)?);
                for (ex, rows) in self.read_scores("test", m, scheme, "assess-test")? {
                    let (_, r_th, k_r) = knn[&ex];
                    let count = |l: TrustLabel| rows.iter().filter(|r| r.trust_label() == Some(l)).count();
                    let n = rows.len();
                    if rows.iter().any(|r| r.label.is_none()) {
                        failure = Some(ex);
                    }
                    let pct = |c: usize| 100.0 * c as f64 / n as f64;
                    summary.push(TrustSummaryRow {
                        model: m,
                        neighbourhood: scheme.name().into(),
                        explainer: ex.tag().into(),
                        r_th,
                        k_r,
                        points: n,
                        robust_pct: pct(count(TrustLabel::Robust)),
                        uncertain_pct: pct(count(TrustLabel::Uncertain)),
                        non_robust_pct: pct(count(TrustLabel::NonRobust)),
                        mean_r_hat: rows.iter().map(|r| r.r_hat).sum::<f64>() / n as f64,
                    });
                }
                if let Some(ex) = failure {
                    return Err(CliError::Stage {
                        stage: st,
                        source: CoreError::Numerical(format!("knn prediction failed for `{ex}`")),
                    });
                }
            }
        }
        summary.sort_by(|a, b| (a.model, &a.neighbourhood).cmp(&(b.model, &b.neighbourhood)));
        write_csv(self.layout.path(Layout::trust_summary()), &summary).stage(st)?;
        out.push(Layout::trust_summary().to_string());
        Ok(out)
    }

    fn validate(&self) -> Result<Vec<String>, CliError> {
        let st = self.stage;
        let encoding = self.encoding()?;
        let test = self.split("test", &encoding)?;
        let models = MODELS.iter().map(|&m| self.model(m)).collect::<Result<Vec<_>, _>>()?;
        let mut agreement = Vec::with_capacity(test.len());
        for (x, &id) in test.x.iter().zip(&test.row_ids) {
            let p = models.iter().map(|m| m.predict_class(x)).collect::<Result<Vec<_>, _>>().stage(st)?;
            agreement.push(AgreementRow { point_id: id, model_1: p[0], model_2: p[1], model_3: p[2], agree: p[0] == p[1] && p[1] == p[2] });
        }
        self.mkdir("validate")?;
        write_csv(self.layout.path(Layout::agreement()), &agreement).stage(st)?;
        let mut out = vec![Layout::agreement().to_string()];
        let agree: BTreeMap<usize, bool> = agreement.iter().map(|a| (a.point_id, a.agree)).collect();
        let n_agree = agreement.iter().filter(|a| a.agree).count();
        log::info!("validate: models agree on {n_agree} of {} test points", agreement.len());

        let mut aucs = Vec::new();
        let mut labels = Vec::new();
        for m in MODELS {
            for scheme in self.cfg.schemes() {
                for (ex, rows) in self.read_scores("test", m, scheme, "assess-test")? {
                    let flags = rows
                        .iter()
                        .map(|r| agree.get(&r.point_id).copied())
                        .collect::<Option<Vec<bool>>>()
                        .ok_or_else(|| CliError::Config("test report does not match the test split; rerun assess-test".into()))?;
                    let scores: Vec<f64> = rows.iter().map(|r| r.r_hat).collect();
                    let row = |auc, status: String| AucRow {
                        model: m,
                        neighbourhood: scheme.name().into(),
                        explainer: ex.tag().into(),
                        auc,
                        status,
                        n_agree: flags.iter().filter(|f| **f).count(),
                        n_disagree: flags.iter().filter(|f| !**f).count(),
                    };
                    match validate_roc(&scores, &flags) {
                        Ok(curve) => {
                            let rel = Layout::roc(m, scheme, ex);
                            write_roc_csv(self.layout.path(&rel), &curve).stage(st)?;
                            out.push(rel);
                            aucs.push(row(Some(curve.auc), "ok".into()));
                        }
                        Err(CoreError::RocUndefined(why)) => aucs.push(row(None, format!("undefined: {why}"))),
                        Err(e) => return Err(CliError::Stage { stage: st, source: e }),
                    }
                    for label in [TrustLabel::Robust, TrustLabel::Uncertain, TrustLabel::NonRobust] {
                        let members: Vec<bool> =
                            rows.iter().zip(&flags).filter(|(r, _)| r.trust_label() == Some(label)).map(|(_, f)| *f).collect();
                        let disagree = members.iter().filter(|f| !**f).count();
                        labels.push(LabelAgreementRow {
                            model: m,
                            neighbourhood: scheme.name().into(),
                            explainer: ex.tag().into(),
                            label: label.tag().into(),
                            points: members.len(),
                            disagree,
                            disagree_fraction: (!members.is_empty()).then(|| disagree as f64 / members.len() as f64),
                        });
                    }
                }
            }
        }
        write_csv(self.layout.path(Layout::auc_summary()), &aucs).stage(st)?;
        write_csv(self.layout.path(Layout::label_agreement()), &labels).stage(st)?;
        out.push(Layout::auc_summary().to_string());
        out.push(Layout::label_agreement().to_string());
        Ok(out)
    }
}

/// Runs one stage and records it in the run manifest.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    std::fs::create_dir_all(&layout.root).stage(stage.name())?;
    let ctx = Ctx { cfg, layout, pool: thread_pool()?, stage: stage.name() };
    let started = Instant::now();
    log::info!("stage {} started", stage.name());
    let mut artifacts = match stage {
        Stage::Preprocess => ctx.preprocess(),
        Stage::Train => ctx.train(),
        Stage::Index => ctx.fit_index(),
        Stage::RobustnessValid => ctx.robustness_valid(),
        Stage::FitTrust => ctx.fit_trust(),
        Stage::AssessTest => ctx.assess_test(),
        Stage::Validate => ctx.validate(),
    }?;
    write_json(ctx.layout.path(Layout::config()), cfg).stage(stage.name())?;
    artifacts.push(Layout::config().to_string());
    let secs = started.elapsed().as_secs_f64();
    log::info!("stage {} finished in {secs:.2}s", stage.name());
    let mut manifest = RunManifest::open(&ctx.layout, cfg);
    manifest.record(&ctx.layout, stage.name(), secs, &artifacts)?;
    Ok(manifest)
}

/// Every stage in order.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let mut manifest = None;
    for stage in Stage::ALL {
        manifest = Some(run_stage(cfg, stage)?);
    }
    Ok(manifest.expect("at least one stage"))
}
