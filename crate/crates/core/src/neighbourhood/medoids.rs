//! k-medoids over the encoded validation points.
//!
//! Seeded D² initialisation, then eager best-removal swaps in the style of
//! FasterPAM until a full pass finds no improving swap (at most 50 passes).

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::stats::euclidean;
use crate::{seed, Error, Result};

pub const MAX_PASSES: usize = 50;
pub const INDEX_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedoidIndex {
    pub version: u32,
    pub n_k: usize,
    /// Medoid coordinates in encoded space.
    pub medoids: Vec<Vec<f64>>,
    /// Row of each medoid in the fitting set.
    pub medoid_rows: Vec<usize>,
    /// Cluster of every fitting point.
    pub assignment: Vec<usize>,
    /// Per medoid, every other medoid ordered by distance (ties by index).
    pub neighbours: Vec<Vec<usize>>,
    /// Sum of point-to-medoid distances over the fitting set.
    pub cost: f64,
    pub passes: usize,
}

impl MedoidIndex {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    /// Nearest medoid, ties to the lower cluster id.
    pub fn assign(&self, x: &[f64]) -> usize {
        nearest(&self.medoids, x).0
    }

    /// The first `k_m` entries of the cluster's neighbour list, clamped to
    /// the available medoids.
    pub fn nearest_medoids(&self, cluster: usize, k_m: usize) -> &[usize] {
        let list = &self.neighbours[cluster];
        &list[..k_m.min(list.len())]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let index: MedoidIndex = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if index.version != INDEX_FILE_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported medoid index version {}", index.version)));
        }
        if index.medoids.is_empty() || index.neighbours.len() != index.medoids.len() {
            return Err(Error::Clustering("medoid index is inconsistent".into()));
        }
        Ok(index)
    }
}

fn nearest(medoids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, m) in medoids.iter().enumerate() {
        let d = euclidean(m, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// `⌈rows / n_k⌉`.
pub fn medoid_count(rows: usize, n_k: usize) -> usize {
    rows.div_ceil(n_k)
}

struct Matrix {
    n: usize,
    d: Vec<f64>,
}

impl Matrix {
    fn new(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = euclidean(&points[i], &points[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// D² sampling over distinct points; `None` when fewer than `k` distinct
/// points exist.
fn init(dist: &Matrix, k: usize, rng: &mut seed::Rng) -> Option<Vec<usize>> {
    let n = dist.n;
    let mut chosen = vec![rng.random_range(0..n)];
    let mut closest: Vec<f64> = (0..n).map(|o| dist.get(o, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = closest.iter().map(|d| d * d).sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = rng.random_range(0.0..total);
        let mut pick = None;
        for (o, d) in closest.iter().enumerate() {
            let w = d * d;
            if w > 0.0 {
                pick = Some(o);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let c = pick?;
        chosen.push(c);
        for (o, cl) in closest.iter_mut().enumerate() {
            *cl = cl.min(dist.get(o, c));
        }
    }
    Some(chosen)
}

struct Cache {
    near: Vec<usize>,
    d_near: Vec<f64>,
    d_second: Vec<f64>,
}

fn build_cache(dist: &Matrix, medoids: &[usize]) -> Cache {
    let n = dist.n;
    let mut c = Cache { near: vec![0; n], d_near: vec![0.0; n], d_second: vec![0.0; n] };
    for o in 0..n {
        let (mut b, mut db, mut ds) = (0, f64::INFINITY, f64::INFINITY);
        for (i, &m) in medoids.iter().enumerate() {
            let d = dist.get(o, m);
            if d < db {
                ds = db;
                b = i;
                db = d;
            } else if d < ds {
                ds = d;
            }
        }
        c.near[o] = b;
        c.d_near[o] = db;
        c.d_second[o] = ds;
    }
    c
}

fn swap_search(dist: &Matrix, medoids: &mut [usize]) -> usize {
    let n = dist.n;
    let k = medoids.len();
    let mut cache = build_cache(dist, medoids);
    let mut last_improvement = 0usize;
    let mut step = 0usize;
    let mut passes = 0;
    'outer: while passes < MAX_PASSES {
        passes += 1;
        for xc in 0..n {
            if step > 0 && step == last_improvement + n {
                break 'outer;
            }
            step += 1;
            if medoids.contains(&xc) {
                continue;
            }
            let mut delta = vec![0.0; k];
            for o in 0..n {
                delta[cache.near[o]] += cache.d_second[o] - cache.d_near[o];
            }
            let mut acc = 0.0;
            for o in 0..n {
                let d = dist.get(o, xc);
                if d < cache.d_near[o] {
                    acc += d - cache.d_near[o];
                    delta[cache.near[o]] += cache.d_near[o] - cache.d_second[o];
                } else if d < cache.d_second[o] {
                    delta[cache.near[o]] += d - cache.d_second[o];
                }
            }
            let (best, best_delta) =
                delta.iter().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b });
            let change = best_delta + acc;
            if change < -1e-10 * (1.0 + cache.d_near.iter().sum::<f64>()) {
                medoids[best] = xc;
                cache = build_cache(dist, medoids);
                last_improvement = step;
            }
        }
    }
    passes
}

/// Fits `⌈N / n_k⌉` medoids on `points`. Fails when fewer points than
/// `n_k` are given or when duplicates leave too few distinct points.
pub fn fit_medoids(points: &[Vec<f64>], n_k: usize, seed: u64) -> Result<MedoidIndex> {
    if n_k == 0 {
        return Err(Error::InvalidConfig("n_k must be positive".into()));
    }
    if points.len() < n_k {
        return Err(Error::InsufficientData(format!(
            "k-medoids needs at least n_k = {n_k} points, got {}",
            points.len()
        )));
    }
    fit_medoids_k(points, medoid_count(points.len(), n_k), n_k, seed)
}

/// Fits exactly `k` medoids; `n_k` is only recorded.
pub fn fit_medoids_k(points: &[Vec<f64>], k: usize, n_k: usize, seed: u64) -> Result<MedoidIndex> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidConfig(format!("k = {k} medoids for {} points", points.len())));
    }
    let dist = Matrix::new(points);
    let n = points.len();

    let (medoid_rows, passes) = if k == 1 {
        let best = (0..n)
            .map(|c| (c, (0..n).map(|o| dist.get(o, c)).sum::<f64>()))
            .fold((0, f64::INFINITY), |b, (c, s)| if s < b.1 { (c, s) } else { b });
        (vec![best.0], 0)
    } else {
        let mut medoids = None;
        for attempt in 0..2u64 {
            let mut rng = seed::rng(seed::derive_indexed(seed, attempt));
            if let Some(m) = init(&dist, k, &mut rng) {
                medoids = Some(m);
                break;
            }
            log::warn!("k-medoids: initialisation attempt {attempt} collapsed on duplicate points");
        }
        let mut medoids = medoids.ok_or_else(|| {
            Error::Clustering(format!("fewer than k = {k} distinct points; medoids would collapse"))
        })?;
        let passes = swap_search(&dist, &mut medoids);
        (medoids, passes)
    };

    let medoids: Vec<Vec<f64>> = medoid_rows.iter().map(|&r| points[r].clone()).collect();
    let mut cost = 0.0;
    let assignment = (0..n)
        .map(|o| {
            let (c, d) = medoid_rows
                .iter()
                .enumerate()
                .map(|(i, &m)| (i, dist.get(o, m)))
                .fold((0, f64::INFINITY), |b, (i, d)| if d < b.1 { (i, d) } else { b });
            cost += d;
            c
        })
        .collect();
    let neighbours = (0..k)
        .map(|c| {
            let mut others: Vec<usize> = (0..k).filter(|&o| o != c).collect();
            others.sort_by(|&a, &b| {
                dist.get(medoid_rows[c], medoid_rows[a])
                    .total_cmp(&dist.get(medoid_rows[c], medoid_rows[b]))
                    .then(a.cmp(&b))
            });
            others
        })
        .collect();
    log::info!("k-medoids: k = {k}, cost {cost:.4}, {passes} swap pass(es)");
    Ok(MedoidIndex { version: INDEX_FILE_VERSION, n_k, medoids, medoid_rows, assignment, neighbours, cost, passes })
}
