//! Perturbation neighbourhoods: random noise `N_R`, medoid interpolation
//! `N_M`, the same-prediction filter and retention tuning.
//!
//! Points live in encoded space. Numeric columns are perturbed directly;
//! a categorical block is perturbed by moving its hot column, which is the
//! same as changing the original modality.

mod medoids;
mod tune;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Encoding, FeatureKind};
use crate::nn::MlpModel;
use crate::{seed, Error, Result};

pub use medoids::{fit_medoids, fit_medoids_k, medoid_count, MedoidIndex, INDEX_FILE_VERSION, MAX_PASSES};
pub use tune::{tune_hyperparams, Candidate, MedoidGrid, RandomGrid, TuneGrid, TuneOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Random,
    Medoid,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::Medoid => "medoid",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Scheme::Random),
            "medoid" => Ok(Scheme::Medoid),
            other => Err(Error::InvalidConfig(format!("unknown neighbourhood scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomConfig {
    pub sigma: f64,
    pub gamma_cat: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self { sigma: 0.05, gamma_cat: 0.05, n: 100, seed: 0 }
    }
}

impl RandomConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !(0.0..=1.0).contains(&self.gamma_cat) || self.n == 0 {
            return Err(Error::InvalidConfig("random neighbourhood needs sigma >= 0, gamma_cat in [0,1], n >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MedoidConfig {
    pub alpha: f64,
    pub alpha_cat: f64,
    pub k_m: usize,
    pub n: usize,
    pub seed: u64,
}

impl Default for MedoidConfig {
    fn default() -> Self {
        Self { alpha: 0.05, alpha_cat: 0.05, k_m: 5, n: 100, seed: 0 }
    }
}

impl MedoidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(0.0..=1.0).contains(&self.alpha_cat) || self.k_m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(
                "medoid neighbourhood needs alpha in (0,1), alpha_cat in [0,1], k_m >= 1, n >= 1".into(),
            ));
        }
        Ok(())
    }

    /// `Beta(100 α, 100 (1 - α))`.
    pub fn beta(&self) -> Result<Beta<f64>> {
        Beta::new(self.alpha * 100.0, (1.0 - self.alpha) * 100.0)
            .map_err(|e| Error::InvalidConfig(format!("beta parameters: {e}")))
    }
}

/// A generator with its hyperparameters; the medoid scheme borrows a
/// fitted index.
#[derive(Debug, Clone, Copy)]
pub enum Generator<'a> {
    Random(RandomConfig),
    Medoid(MedoidConfig, &'a MedoidIndex),
}

impl Generator<'_> {
    pub fn scheme(&self) -> Scheme {
        match self {
            Generator::Random(_) => Scheme::Random,
            Generator::Medoid(..) => Scheme::Medoid,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Generator::Random(c) => c.n,
            Generator::Medoid(c, _) => c.n,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match *self {
            Generator::Random(c) => Generator::Random(RandomConfig { seed, ..c }),
            Generator::Medoid(c, idx) => Generator::Medoid(MedoidConfig { seed, ..c }, idx),
        }
    }

    pub fn generate(&self, x: &[f64], encoding: &Encoding) -> Result<Vec<Vec<f64>>> {
        match self {
            Generator::Random(c) => gen_random(x, encoding, c),
            Generator::Medoid(c, idx) => gen_medoid(x, idx, encoding, c),
        }
    }
}

fn check_width(x: &[f64], encoding: &Encoding) -> Result<()> {
    if x.len() != encoding.width() {
        return Err(Error::DimensionMismatch { expected: encoding.width(), got: x.len() });
    }
    Ok(())
}

fn set_hot(x: &mut [f64], start: usize, width: usize, hot: usize) {
    for v in &mut x[start..start + width] {
        *v = 0.0;
    }
    x[start + hot] = 1.0;
}

/// `n` copies of `x` with `N(0, σ²)` noise on numerics; each categorical
/// independently moves to a uniformly drawn different modality with
/// probability `γ_cat`.
pub fn gen_random(x: &[f64], encoding: &Encoding, cfg: &RandomConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_width(x, encoding)?;
    let normal = Normal::new(0.0, cfg.sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = seed::rng(cfg.seed);
    let hot: Vec<usize> = (0..encoding.features.len()).map(|fi| encoding.hot_index(x, fi)).collect();
    for f in encoding.features.iter().filter(|f| f.kind == FeatureKind::Categorical && f.width < 2) {
        log::debug!("random neighbourhood: `{}` has a single modality and never flips", f.name);
    }
    let mut out = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let mut p = x.to_vec();
        for (fi, f) in encoding.features.iter().enumerate() {
            match f.kind {
                FeatureKind::Numeric => {
                    if cfg.sigma > 0.0 {
                        p[f.start] += normal.sample(&mut rng);
                    }
                }
                FeatureKind::Categorical => {
                    if f.width >= 2 && cfg.gamma_cat > 0.0 && rng.random_bool(cfg.gamma_cat) {
                        // uniform over the other width - 1 modalities
                        let mut m = rng.random_range(0..f.width - 1);
                        if m >= hot[fi] {
                            m += 1;
                        }
                        set_hot(&mut p, f.start, f.width, m);
                    }
                }
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// One medoid-scheme perturbation: numerics move to `x + ᾱ (x^M - x)`,
/// categorical `fi` copies the medoid's modality where `adopt[fi]` holds.
pub fn perturb_toward(x: &[f64], medoid: &[f64], alpha_bar: f64, adopt: &[bool], encoding: &Encoding) -> Vec<f64> {
    let mut p = x.to_vec();
    for (fi, f) in encoding.features.iter().enumerate() {
        match f.kind {
            FeatureKind::Numeric => p[f.start] = x[f.start] + alpha_bar * (medoid[f.start] - x[f.start]),
            FeatureKind::Categorical => {
                if adopt[fi] {
                    p[f.range()].copy_from_slice(&medoid[f.range()]);
                }
            }
        }
    }
    p
}

/// `n` perturbations toward medoids drawn uniformly from the `k_M` nearest
/// medoids of the cluster of `x`.
pub fn gen_medoid(x: &[f64], index: &MedoidIndex, encoding: &Encoding, cfg: &MedoidConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_width(x, encoding)?;
    if index.medoids.first().map(Vec::len) != Some(x.len()) {
        return Err(Error::DimensionMismatch { expected: x.len(), got: index.medoids.first().map_or(0, Vec::len) });
    }
    let cluster = index.assign(x);
    let pool = index.nearest_medoids(cluster, cfg.k_m);
    if pool.is_empty() {
        return Err(Error::InsufficientData("medoid neighbourhood needs at least two medoids".into()));
    }
    if pool.len() < cfg.k_m {
        log::debug!("medoid neighbourhood: k_M = {} clamped to {}", cfg.k_m, pool.len());
    }
    let beta = cfg.beta()?;
    let mut rng = seed::rng(cfg.seed);
    let mut adopt = vec![false; encoding.features.len()];
    let mut out = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let m = pool[rng.random_range(0..pool.len())];
        let alpha_bar = beta.sample(&mut rng);
        for (a, f) in adopt.iter_mut().zip(&encoding.features) {
            *a = f.kind == FeatureKind::Categorical && cfg.alpha_cat > 0.0 && rng.random_bool(cfg.alpha_cat);
        }
        out.push(perturb_toward(x, &index.medoids[m], alpha_bar, &adopt, encoding));
    }
    Ok(out)
}

/// Perturbations of one point after the same-prediction filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbourhood {
    pub origin_class: usize,
    pub points: Vec<Vec<f64>>,
    pub kept: Vec<bool>,
    pub retention: f64,
    pub scheme: Scheme,
    /// 1, or 2 when the first draw kept fewer than half the points.
    pub attempts: usize,
}

impl Neighbourhood {
    pub fn kept_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().zip(&self.kept).filter(|(_, k)| **k).map(|(p, _)| p.as_slice())
    }

    pub fn n_kept(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }
}

pub fn filter_neighbourhood(model: &MlpModel, x: &[f64], points: Vec<Vec<f64>>, scheme: Scheme) -> Result<Neighbourhood> {
    let origin_class = model.predict_class(x)?;
    let kept = points
        .iter()
        .map(|p| model.predict_class(p).map(|c| c == origin_class))
        .collect::<Result<Vec<bool>>>()?;
    let retention = if points.is_empty() { 0.0 } else { kept.iter().filter(|k| **k).count() as f64 / points.len() as f64 };
    Ok(Neighbourhood { origin_class, points, kept, retention, scheme, attempts: 1 })
}

/// Generate, filter and, if fewer than half survive, regenerate once from
/// a derived seed; the second draw replaces the first.
pub fn build_neighbourhood(model: &MlpModel, x: &[f64], encoding: &Encoding, generator: &Generator<'_>) -> Result<Neighbourhood> {
    let first = filter_neighbourhood(model, x, generator.generate(x, encoding)?, generator.scheme())?;
    if 2 * first.n_kept() >= generator.n() {
        return Ok(first);
    }
    let base = match generator {
        Generator::Random(c) => c.seed,
        Generator::Medoid(c, _) => c.seed,
    };
    let retry = generator.with_seed(seed::derive_indexed(base, 1));
    let mut second = filter_neighbourhood(model, x, retry.generate(x, encoding)?, generator.scheme())?;
    second.attempts = 2;
    Ok(second)
}

/// CSV `point_id, perturbation_idx, kept, <encoded columns>`.
pub fn write_neighbourhoods_csv<'a>(
    path: impl AsRef<Path>,
    encoding: &Encoding,
    rows: impl IntoIterator<Item = (usize, &'a Neighbourhood)>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "point_id,perturbation_idx,kept,{}", encoding.column_names().join(","))?;
    for (id, nb) in rows {
        for (i, (p, k)) in nb.points.iter().zip(&nb.kept).enumerate() {
            let vals: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{id},{i},{},{}", u8::from(*k), vals.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::EncodedFeature;
    use crate::nn::{Activation, DenseLayer};

    pub(crate) fn mixed_encoding() -> Encoding {
        Encoding {
            features: vec![
                EncodedFeature { name: "a".into(), kind: FeatureKind::Numeric, start: 0, width: 1, modalities: vec![], scaler: None },
                EncodedFeature {
                    name: "c".into(),
                    kind: FeatureKind::Categorical,
                    start: 1,
                    width: 3,
                    modalities: vec!["p".into(), "q".into(), "r".into()],
                    scaler: None,
                },
                EncodedFeature { name: "b".into(), kind: FeatureKind::Numeric, start: 4, width: 1, modalities: vec![], scaler: None },
            ],
            dropped: vec![],
            label: "y".into(),
            classes: vec!["0".into(), "1".into()],
        }
    }

    pub(crate) fn numeric_encoding(m: usize) -> Encoding {
        Encoding {
            features: (0..m)
                .map(|i| EncodedFeature {
                    name: format!("f{i}"),
                    kind: FeatureKind::Numeric,
                    start: i,
                    width: 1,
                    modalities: vec![],
                    scaler: None,
                })
                .collect(),
            dropped: vec![],
            label: "y".into(),
            classes: vec!["0".into(), "1".into()],
        }
    }

    /// Two-class model with logit difference `w · x + b` (class 1 minus class 0).
    pub(crate) fn linear_model(w: &[f64], b: f64) -> MlpModel {
        let d = w.len();
        let mut weights = vec![0.0; d];
        weights.extend_from_slice(w);
        MlpModel::new(vec![DenseLayer::new(2, d, weights, vec![0.0, b], Activation::Identity).unwrap()]).unwrap()
    }

    #[test]
    fn zero_noise_gives_copies() {
        let enc = mixed_encoding();
        let x = [0.3, 0.0, 1.0, 0.0, -1.2];
        let pts = gen_random(&x, &enc, &RandomConfig { sigma: 0.0, gamma_cat: 0.0, n: 50, seed: 1 }).unwrap();
        assert!(pts.iter().all(|p| p == &x));
    }

    #[test]
    fn flips_have_expected_frequency_and_never_keep_the_value() {
        let enc = mixed_encoding();
        let x = [0.0, 0.0, 1.0, 0.0, 0.0];
        let g = 0.05;
        let n = 10_000;
        let pts = gen_random(&x, &enc, &RandomConfig { sigma: 0.05, gamma_cat: g, n, seed: 2 }).unwrap();
        let mut flipped = 0;
        for p in &pts {
            let block = &p[1..4];
            assert_eq!(block.iter().filter(|v| **v == 1.0).count(), 1);
            assert_eq!(block.iter().sum::<f64>(), 1.0);
            if block[1] != 1.0 {
                flipped += 1;
            }
        }
        let freq = flipped as f64 / n as f64;
        let tol = 3.0 * (g * (1.0 - g) / n as f64).sqrt();
        assert!((freq - g).abs() <= tol, "{freq}");
    }

    #[test]
    fn generators_are_seeded() {
        let enc = mixed_encoding();
        let x = [0.3, 1.0, 0.0, 0.0, -1.2];
        let cfg = RandomConfig { sigma: 0.3, gamma_cat: 0.5, n: 20, seed: 5 };
        assert_eq!(gen_random(&x, &enc, &cfg).unwrap(), gen_random(&x, &enc, &cfg).unwrap());
        assert_ne!(gen_random(&x, &enc, &cfg).unwrap(), gen_random(&x, &enc, &RandomConfig { seed: 6, ..cfg }).unwrap());
    }

    #[test]
    fn alpha_bar_zero_keeps_numerics() {
        let enc = mixed_encoding();
        let x = [0.3, 1.0, 0.0, 0.0, -1.2];
        let m = [2.0, 0.0, 0.0, 1.0, 5.0];
        assert_eq!(perturb_toward(&x, &m, 0.0, &[false; 3], &enc), x.to_vec());
        let p = perturb_toward(&x, &m, 0.25, &[false, true, false], &enc);
        assert_eq!(p, vec![0.3 + 0.25 * 1.7, 0.0, 0.0, 1.0, -1.2 + 0.25 * 6.2]);
    }

    #[test]
    fn beta_mean_matches_alpha() {
        let cfg = MedoidConfig { alpha: 0.3, ..Default::default() };
        let beta = cfg.beta().unwrap();
        let mut rng = seed::rng(3);
        let n = 100_000;
        let mean = (0..n).map(|_| beta.sample(&mut rng)).sum::<f64>() / n as f64;
        let exact = 30.0 / (30.0 + 70.0);
        assert!((mean - exact).abs() < 0.003, "{mean}");
    }

    fn grid_points(side: usize) -> Vec<Vec<f64>> {
        (0..side * side).map(|i| vec![(i % side) as f64, (i / side) as f64]).collect()
    }

    #[test]
    fn medoid_points_lie_on_segments() {
        let enc = numeric_encoding(2);
        let pts = grid_points(10);
        let index = fit_medoids(&pts, 10, 1).unwrap();
        let x = [4.2, 5.1];
        let cfg = MedoidConfig { alpha: 0.3, alpha_cat: 0.0, k_m: 5, n: 200, seed: 4 };
        let out = gen_medoid(&x, &index, &enc, &cfg).unwrap();
        let pool = index.nearest_medoids(index.assign(&x), 5);
        for p in &out {
            // some pool medoid m and a shared t in (0,1) with p = x + t (m - x)
            let ok = pool.iter().any(|&c| {
                let m = &index.medoids[c];
                let t0 = (p[0] - x[0]) / (m[0] - x[0]);
                let t1 = (p[1] - x[1]) / (m[1] - x[1]);
                let t = if t0.is_finite() { t0 } else { t1 };
                t > 0.0 && t < 1.0 && (0..2).all(|j| (x[j] + t * (m[j] - x[j]) - p[j]).abs() < 1e-12)
            });
            assert!(ok, "{p:?}");
        }
        assert_eq!(out, gen_medoid(&x, &index, &enc, &cfg).unwrap());
    }

    #[test]
    fn k_m_is_clamped() {
        let enc = numeric_encoding(2);
        let index = fit_medoids(&grid_points(5), 10, 0).unwrap();
        assert_eq!(index.k(), 3);
        let cfg = MedoidConfig { k_m: 50, n: 10, ..Default::default() };
        assert_eq!(gen_medoid(&[1.0, 1.0], &index, &enc, &cfg).unwrap().len(), 10);
    }

    #[test]
    fn filter_keeps_same_prediction_only() {
        let m = linear_model(&[1.0, 0.0], 0.0);
        let x = [0.5, 0.0];
        let nb = filter_neighbourhood(&m, &x, vec![x.to_vec(); 10], Scheme::Random).unwrap();
        assert_eq!(nb.retention, 1.0);
        let pts = vec![vec![0.2, 0.0], vec![-0.2, 1.0], vec![1.0, -3.0], vec![-0.01, 0.0]];
        let nb = filter_neighbourhood(&m, &x, pts, Scheme::Random).unwrap();
        assert_eq!(nb.kept, vec![true, false, true, false]);
        assert_eq!(nb.retention, 0.5);
        for p in nb.kept_points() {
            assert_eq!(m.predict_class(p).unwrap(), nb.origin_class);
        }
        let constant = linear_model(&[0.0, 0.0], 1.0);
        let pts = gen_random(&x, &numeric_encoding(2), &RandomConfig { sigma: 10.0, n: 100, ..Default::default() }).unwrap();
        assert_eq!(filter_neighbourhood(&constant, &x, pts, Scheme::Random).unwrap().retention, 1.0);
    }

    #[test]
    fn retention_matches_gaussian_half_space() {
        // logit difference x_0, point at distance 0.1 from the boundary
        let m = linear_model(&[1.0, 0.0, 0.0], 0.0);
        let enc = numeric_encoding(3);
        let x = [0.1, 0.4, -0.3];
        let sigma = 0.05;
        let pts = gen_random(&x, &enc, &RandomConfig { sigma, gamma_cat: 0.0, n: 20_000, seed: 8 }).unwrap();
        let nb = filter_neighbourhood(&m, &x, pts, Scheme::Random).unwrap();
        let expected = statrs_phi(0.1 / sigma);
        assert!((nb.retention - expected).abs() < 0.02, "{} vs {expected}", nb.retention);
    }

    fn statrs_phi(z: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::new(0.0, 1.0).unwrap().cdf(z)
    }

    #[test]
    fn regeneration_replaces_a_poor_first_draw() {
        let m = linear_model(&[1.0, 0.0], 0.0);
        let enc = numeric_encoding(2);
        // on the boundary roughly half survive; a second draw is taken when fewer than half do
        let x = [1e-9, 0.0];
        let mut saw_retry = false;
        for s in 0..40 {
            let g = Generator::Random(RandomConfig { sigma: 1.0, gamma_cat: 0.0, n: 11, seed: s });
            let nb = build_neighbourhood(&m, &x, &enc, &g).unwrap();
            assert_eq!(nb.points.len(), 11);
            if nb.attempts == 2 {
                saw_retry = true;
                let again = filter_neighbourhood(&m, &x, g.with_seed(seed::derive_indexed(s, 1)).generate(&x, &enc).unwrap(), Scheme::Random).unwrap();
                assert_eq!(nb.kept, again.kept);
            }
        }
        assert!(saw_retry);
    }

    #[test]
    fn dump_has_one_row_per_perturbation() {
        let enc = mixed_encoding();
        let m = linear_model(&[1.0, 0.0, 0.0, 0.0, 0.0], 0.0);
        let x = [0.5, 1.0, 0.0, 0.0, 0.0];
        let pts = gen_random(&x, &enc, &RandomConfig { n: 4, ..Default::default() }).unwrap();
        let nb = filter_neighbourhood(&m, &x, pts, Scheme::Random).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nb.csv");
        write_neighbourhoods_csv(&path, &enc, [(7, &nb)]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("point_id,perturbation_idx,kept,a,c=p,c=q,c=r,b"));
    }
}
