//! Swiss roll: points `(t cos t, h, t sin t)` on a rolled sheet.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{seed, Error, Result};

pub const T_MIN: f64 = 1.5 * PI;
pub const T_MAX: f64 = 4.5 * PI;
pub const HEIGHT: f64 = 21.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SwissRoll {
    pub points: Vec<[f64; 3]>,
    /// Roll parameter of each point before jitter.
    pub t: Vec<f64>,
    pub h: Vec<f64>,
}

/// `n` points with `t ~ U(1.5π, 4.5π)`, `h ~ U(0, 21)` and isotropic
/// Gaussian jitter of standard deviation `noise`.
pub fn swiss_roll(n: usize, noise: f64, seed: u64) -> Result<SwissRoll> {
    if n == 0 {
        return Err(Error::InvalidConfig("swiss roll needs n > 0".into()));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidConfig("noise must be non-negative".into()));
    }
    let mut rng = seed::rng(seed);
    let jitter = Normal::new(0.0, noise).expect("checked");
    let mut roll = SwissRoll { points: Vec::with_capacity(n), t: Vec::with_capacity(n), h: Vec::with_capacity(n) };
    for _ in 0..n {
        let t = rng.random_range(T_MIN..T_MAX);
        let h = rng.random_range(0.0..HEIGHT);
        let mut p = [t * t.cos(), h, t * t.sin()];
        if noise > 0.0 {
            for c in &mut p {
                *c += jitter.sample(&mut rng);
            }
        }
        roll.points.push(p);
        roll.t.push(t);
        roll.h.push(h);
    }
    Ok(roll)
}

fn spiral_sq_dist(x: f64, z: f64, t: f64) -> f64 {
    let dx = x - t * t.cos();
    let dz = z - t * t.sin();
    dx * dx + dz * dz
}

/// Euclidean distance from `p` to the roll surface, by projecting onto the
/// nearest roll parameter (grid scan, then golden-section refinement).
pub fn distance_to_roll(p: [f64; 3]) -> f64 {
    const GRID: usize = 4000;
    let step = (T_MAX - T_MIN) / GRID as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..=GRID {
        let d = spiral_sq_dist(p[0], p[2], T_MIN + step * i as f64);
        if d < best {
            best = d;
            best_i = i;
        }
    }
    let mut lo = (T_MIN + step * (best_i as f64 - 1.0)).max(T_MIN);
    let mut hi = (T_MIN + step * (best_i as f64 + 1.0)).min(T_MAX);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if spiral_sq_dist(p[0], p[2], a) < spiral_sq_dist(p[0], p[2], b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let radial = best.min(spiral_sq_dist(p[0], p[2], 0.5 * (lo + hi)));
    let dy = p[1] - p[1].clamp(0.0, HEIGHT);
    (radial + dy * dy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_points_satisfy_parametric_identity() {
        let roll = swiss_roll(500, 0.0, 1).unwrap();
        assert_eq!(roll.points.len(), 500);
        for (p, t) in roll.points.iter().zip(&roll.t) {
            assert!(((p[0] * p[0] + p[2] * p[2]).sqrt() - t).abs() < 1e-12);
            assert!(distance_to_roll(*p) < 1e-9);
        }
    }

    #[test]
    fn distance_grows_with_noise() {
        let mean_dist = |noise| {
            let r = swiss_roll(500, noise, 2).unwrap();
            r.points.iter().map(|p| distance_to_roll(*p)).sum::<f64>() / 500.0
        };
        let (d0, d3) = (mean_dist(0.0), mean_dist(0.3));
        assert!(d0 < 1e-9);
        assert!(d3 > 0.1 && d3 < 0.3, "{d3}");
    }

    #[test]
    fn rejects_empty() {
        assert!(swiss_roll(0, 0.1, 0).is_err());
        assert_eq!(swiss_roll(10, 0.1, 5).unwrap(), swiss_roll(10, 0.1, 5).unwrap());
    }
}
