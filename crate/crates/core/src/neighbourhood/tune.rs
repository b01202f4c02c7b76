use serde::{Deserialize, Serialize};

use super::{filter_neighbourhood, Generator, MedoidConfig, MedoidIndex, RandomConfig, Scheme};
use crate::data::Encoding;
use crate::nn::MlpModel;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomGrid {
    pub sigma: Vec<f64>,
    pub gamma_cat: Vec<f64>,
}

/// Both default grids use the same multiples of the 0.05 defaults.
const DEFAULT_MAGNITUDES: [f64; 6] = [0.001, 0.01, 0.025, 0.05, 0.1, 0.15];

impl Default for RandomGrid {
    fn default() -> Self {
        Self { sigma: DEFAULT_MAGNITUDES.to_vec(), gamma_cat: DEFAULT_MAGNITUDES.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MedoidGrid {
    pub alpha: Vec<f64>,
    pub alpha_cat: Vec<f64>,
    pub k_m: Vec<usize>,
}

impl Default for MedoidGrid {
    fn default() -> Self {
        Self { alpha: DEFAULT_MAGNITUDES.to_vec(), alpha_cat: DEFAULT_MAGNITUDES.to_vec(), k_m: vec![4, 5, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneGrid {
    Random(RandomGrid),
    Medoid(MedoidGrid),
}

impl TuneGrid {
    pub fn scheme(&self) -> Scheme {
        match self {
            TuneGrid::Random(_) => Scheme::Random,
            TuneGrid::Medoid(_) => Scheme::Medoid,
        }
    }
}

/// One tuned or candidate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidate {
    Random(RandomConfig),
    Medoid(MedoidConfig),
}

impl Candidate {
    /// Perturbation size, compared lexicographically.
    fn magnitude(&self) -> Vec<f64> {
        match self {
            Candidate::Random(c) => vec![c.sigma, c.gamma_cat],
            Candidate::Medoid(c) => vec![c.alpha, c.alpha_cat, c.k_m as f64],
        }
    }

    pub fn generator<'a>(&self, index: Option<&'a MedoidIndex>) -> Result<Generator<'a>> {
        match *self {
            Candidate::Random(c) => Ok(Generator::Random(c)),
            Candidate::Medoid(c) => index
                .map(|idx| Generator::Medoid(c, idx))
                .ok_or_else(|| Error::InvalidConfig("medoid scheme requires a fitted medoid index".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub candidates: Vec<Candidate>,
    pub mean_retention: Vec<f64>,
    /// `per_point[c][i]`: retention of sample point `i` under candidate `c`.
    pub per_point: Vec<Vec<f64>>,
    pub chosen: usize,
    /// False when no candidate reached the target and the smallest was used.
    pub qualified: bool,
}

impl TuneOutcome {
    pub fn best(&self) -> Candidate {
        self.candidates[self.chosen]
    }
}

fn expand(grid: &TuneGrid, n: usize) -> Vec<Candidate> {
    let mut out = Vec::new();
    match grid {
        TuneGrid::Random(g) => {
            for &sigma in &g.sigma {
                for &gamma_cat in &g.gamma_cat {
                    out.push(Candidate::Random(RandomConfig { sigma, gamma_cat, n, seed: 0 }));
                }
            }
        }
        TuneGrid::Medoid(g) => {
            for &alpha in &g.alpha {
                for &alpha_cat in &g.alpha_cat {
                    for &k_m in &g.k_m {
                        out.push(Candidate::Medoid(MedoidConfig { alpha, alpha_cat, k_m, n, seed: 0 }));
                    }
                }
            }
        }
    }
    out
}

/// Grid search for the largest perturbation whose mean retention over
/// `sample` reaches `target`. Every candidate sees the same per-point seeds.
pub fn tune_hyperparams(
    model: &MlpModel,
    sample: &[Vec<f64>],
    encoding: &Encoding,
    grid: &TuneGrid,
    index: Option<&MedoidIndex>,
    n: usize,
    target: f64,
    seed: u64,
) -> Result<TuneOutcome> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("tuning sample is empty".into()));
    }
    let candidates = expand(grid, n);
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("tuning grid is empty".into()));
    }
    let mut per_point = Vec::with_capacity(candidates.len());
    let mut mean_retention = Vec::with_capacity(candidates.len());
    for cand in &candidates {
        let generator = cand.generator(index)?;
        let rates = sample
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let g = generator.with_seed(seed::derive_indexed(seed, i as u64));
                filter_neighbourhood(model, x, g.generate(x, encoding)?, g.scheme()).map(|nb| nb.retention)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        log::info!("tune {:?}: mean retention {mean:.4}", cand);
        mean_retention.push(mean);
        per_point.push(rates);
    }

    let by_magnitude = |a: &usize, b: &usize| {
        let (ma, mb) = (candidates[*a].magnitude(), candidates[*b].magnitude());
        ma.iter().zip(&mb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    let qualifying = (0..candidates.len()).filter(|&c| mean_retention[c] >= target);
    let (chosen, qualified) = match qualifying.max_by(|a, b| by_magnitude(a, b).then(b.cmp(a))) {
        Some(c) => (c, true),
        None => {
            let c = (0..candidates.len()).min_by(|a, b| by_magnitude(a, b).then(a.cmp(b))).expect("non-empty");
            log::warn!("tune: no grid point reaches retention {target}; using the smallest {:?}", candidates[c]);
            (c, false)
        }
    };
    Ok(TuneOutcome { candidates, mean_retention, per_point, chosen, qualified })
}
