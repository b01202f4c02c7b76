use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{softmax, Activation, DenseLayer, MlpModel};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![32, 16],
            activation: Activation::Relu,
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be positive".into()));
        }
        if self.activation == Activation::Identity && !self.hidden_dims.is_empty() {
            log::warn!("identity hidden activations make the network linear");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub epochs: usize,
}

fn init_model(input_dim: usize, classes: usize, cfg: &TrainConfig, rng: &mut seed::Rng) -> Result<MlpModel> {
    let mut dims = vec![input_dim];
    dims.extend(&cfg.hidden_dims);
    dims.push(classes);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).enumerate() {
        let (cols, rows) = (w[0], w[1]);
        let last = i + 2 == dims.len();
        let act = if last { Activation::Identity } else { cfg.activation };
        // uniform(-l, l) with l scaled by fan-in: He for ReLU, LeCun otherwise
        let gain = if act == Activation::Relu { 6.0 } else { 3.0 };
        let limit = (gain / cols as f64).sqrt();
        let weights = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        layers.push(DenseLayer::new(rows, cols, weights, vec![0.0; rows], act)?);
    }
    MlpModel::new(layers)
}

/// Mini-batch SGD with momentum on the softmax cross-entropy.
///
/// Deterministic for a given `(data, config)`; `config.seed` drives both the
/// weight init and the per-epoch shuffles.
pub fn train(x: &[Vec<f64>], y: &[usize], classes: usize, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if classes < 2 {
        return Err(Error::InvalidConfig("need at least two classes".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::InvalidConfig(format!("label {bad} out of range for {classes} classes")));
    }
    let input_dim = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != input_dim) {
        return Err(Error::DimensionMismatch { expected: input_dim, got: row.len() });
    }

    let mut rng = seed::rng(cfg.seed);
    let mut model = init_model(input_dim, classes, cfg, &mut rng)?;
    let mut velocity: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers()
        .iter()
        .map(|l| (vec![0.0; l.weights().len()], vec![0.0; l.bias().len()]))
        .collect();
    let mut grads = velocity.clone();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut final_loss = f64::NAN;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for (gw, gb) in grads.iter_mut() {
                gw.iter_mut().for_each(|g| *g = 0.0);
                gb.iter_mut().for_each(|g| *g = 0.0);
            }
            for &i in batch {
                let trace = model.forward_traced(&x[i])?;
                let p = &trace.probabilities;
                epoch_loss -= p[y[i]].max(1e-300).ln();
                // dL/dlogits = p - onehot(y)
                let mut g: Vec<f64> = p.clone();
                g[y[i]] -= 1.0;
                for (k, layer) in model.layers().iter().enumerate().rev() {
                    let act = layer.activation();
                    for (gi, z) in g.iter_mut().zip(&trace.pre_activations[k]) {
                        *gi *= act.derivative(*z);
                    }
                    let input = trace.layer_input(k);
                    let (gw, gb) = &mut grads[k];
                    for (r, gr) in g.iter().enumerate() {
                        gb[r] += gr;
                        if *gr != 0.0 {
                            let row = &mut gw[r * layer.cols()..(r + 1) * layer.cols()];
                            for (w, a) in row.iter_mut().zip(input) {
                                *w += gr * a;
                            }
                        }
                    }
                    if k > 0 {
                        g = layer.backward_input(&g);
                    }
                }
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for ((layer, (vw, vb)), (gw, gb)) in
                model.layers_mut().iter_mut().zip(velocity.iter_mut()).zip(&grads)
            {
                for ((w, v), g) in layer.weights_mut().iter_mut().zip(vw.iter_mut()).zip(gw) {
                    *v = cfg.momentum * *v - scale * g;
                    *w += *v;
                }
                for ((b, v), g) in layer.bias_mut().iter_mut().zip(vb.iter_mut()).zip(gb) {
                    *v = cfg.momentum * *v - scale * g;
                    *b += *v;
                }
            }
        }
        final_loss = epoch_loss / x.len() as f64;
        let params_finite = model
            .layers()
            .iter()
            .all(|l| l.weights().iter().chain(l.bias()).all(|w| w.is_finite()));
        if !final_loss.is_finite() || !params_finite {
            return Err(Error::Numerical(format!(
                "training loss became non-finite at epoch {epoch}; lower the learning rate"
            )));
        }
    }

    let correct = x
        .iter()
        .zip(y)
        .filter(|(xi, &yi)| super::argmax(&softmax(&model.logits(xi).expect("checked dims"))) == yi)
        .count();
    let report = TrainReport {
        final_loss,
        train_accuracy: correct as f64 / x.len() as f64,
        epochs: cfg.epochs,
    };
    log::info!(
        "trained {:?} for {} epochs: loss {:.4}, train accuracy {:.4}",
        cfg.hidden_dims,
        cfg.epochs,
        report.final_loss,
        report.train_accuracy
    );
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            x.push(vec![centre + noise.sample(&mut rng), centre + noise.sample(&mut rng)]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let (x, y) = blobs(1, 200);
        let cfg = TrainConfig { hidden_dims: vec![8], epochs: 50, ..Default::default() };
        let (_, report) = train(&x, &y, 2, &cfg).unwrap();
        assert!(report.train_accuracy >= 0.99, "{report:?}");
    }

    #[test]
    fn same_seed_same_weights() {
        let (x, y) = blobs(2, 100);
        let cfg = TrainConfig { hidden_dims: vec![4], epochs: 5, seed: 11, ..Default::default() };
        let (a, _) = train(&x, &y, 2, &cfg).unwrap();
        let (b, _) = train(&x, &y, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = train(&x, &y, 2, &TrainConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn divergent_learning_rate_is_reported() {
        let (mut x, y) = blobs(3, 50);
        for row in &mut x {
            row[0] *= 1e300;
        }
        let cfg = TrainConfig { hidden_dims: vec![4], epochs: 3, learning_rate: 1e10, ..Default::default() };
        assert!(matches!(train(&x, &y, 2, &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn rejects_bad_config() {
        let (x, y) = blobs(4, 10);
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(train(&x, &y, 2, &bad).is_err());
        assert!(train(&x, &y, 1, &TrainConfig::default()).is_err());
    }
}
