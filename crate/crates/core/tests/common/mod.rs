#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use robustcheck_core::nn::{Activation, DenseLayer, MlpModel};
use robustcheck_core::seed;

pub fn gauss(rng: &mut seed::Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_dims(rng: &mut seed::Rng) -> Vec<usize> {
    let mut dims = vec![rng.random_range(2..8)];
    for _ in 0..rng.random_range(1..3) {
        dims.push(rng.random_range(2..10));
    }
    dims.push(rng.random_range(2..4));
    dims
}

/// Weights scaled by fan-in; the output layer is linear.
pub fn random_net(rng: &mut seed::Rng, dims: &[usize], act: Activation, bias: bool) -> MlpModel {
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (cols, rows) = (w[0], w[1]);
            let weights = (0..rows * cols).map(|_| gauss(rng) / (cols as f64).sqrt()).collect();
            let b = (0..rows).map(|_| if bias { 0.3 * gauss(rng) } else { 0.0 }).collect();
            DenseLayer::new(rows, cols, weights, b, if i == last { Activation::Identity } else { act }).unwrap()
        })
        .collect();
    MlpModel::new(layers).unwrap()
}

/// A random net with a random input and target, all from one seed.
pub fn case(seed_value: u64, act: Activation, bias: bool) -> (MlpModel, Vec<f64>, usize) {
    let mut rng = seed::rng(seed_value);
    let dims = random_dims(&mut rng);
    let model = random_net(&mut rng, &dims, act, bias);
    let x = (0..dims[0]).map(|_| gauss(&mut rng)).collect();
    let t = rng.random_range(0..dims[dims.len() - 1]);
    (model, x, t)
}
