//! Dense feed-forward classifier.
//!
//! A model is a chain of [`DenseLayer`]s, `z = W a + b`, `a' = act(z)`,
//! followed by a softmax head. The output of the last layer is the logit
//! vector; attributions differentiate either the logit of the target class
//! or its softmax probability (see [`Head`]).

mod io;
mod train;

pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FILE_VERSION};
pub use train::{train, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at `z`. The ReLU derivative at 0 is taken as 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Which scalar of the network an attribution explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Pre-softmax score of the target class.
    #[default]
    Logit,
    /// Softmax probability of the target class.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("layer dimensions must be positive".into()));
        }
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: weights.len() });
        }
        if bias.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, got: bias.len() });
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::Numerical("non-finite layer parameter".into()));
        }
        Ok(Self { rows, cols, weights, bias, activation })
    }

    pub fn zeros(rows: usize, cols: usize, activation: Activation) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols], vec![0.0; rows], activation)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.cols..(row + 1) * self.cols]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// `W a + b`.
    pub fn affine(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r).iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + self.bias[r]
            })
            .collect()
    }

    /// `Wᵀ g`.
    pub fn backward_input(&self, grad_pre: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, g) in grad_pre.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * g;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<DenseLayer>,
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// `z^(k)` per layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// `a^(k)` per layer; the last entry is the logit vector.
    pub activations: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub predicted: usize,
}

impl ForwardTrace {
    pub fn logits(&self) -> &[f64] {
        self.activations.last().expect("model has at least one layer")
    }

    /// Input of layer `k`: `x` for the first layer, `a^(k-1)` otherwise.
    pub fn layer_input(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.input
        } else {
            &self.activations[k - 1]
        }
    }

    pub fn score(&self, target: usize, head: Head) -> f64 {
        match head {
            Head::Logit => self.logits()[target],
            Head::Softmax => self.probabilities[target],
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidConfig("model needs at least one layer".into()))?;
        let input_dim = first.cols;
        for pair in layers.windows(2) {
            if pair[0].rows != pair[1].cols {
                return Err(Error::DimensionMismatch { expected: pair[0].rows, got: pair[1].cols });
            }
        }
        let output_dim = layers.last().map(|l| l.rows).unwrap_or_default();
        Ok(Self { input_dim, output_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            let act = layer.activation;
            a = layer.affine(&a).into_iter().map(|z| act.apply(z)).collect();
        }
        Ok(a)
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = activations.last().map(Vec::as_slice).unwrap_or(x);
            let z = layer.affine(input);
            let act = layer.activation;
            activations.push(z.iter().map(|&v| act.apply(v)).collect());
            pre_activations.push(z);
        }
        let probabilities = softmax(activations.last().expect("non-empty"));
        let predicted = argmax(&probabilities);
        Ok(ForwardTrace { input: x.to_vec(), pre_activations, activations, probabilities, predicted })
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn score(&self, x: &[f64], target: usize, head: Head) -> Result<f64> {
        self.check_target(target)?;
        let logits = self.logits(x)?;
        Ok(match head {
            Head::Logit => logits[target],
            Head::Softmax => softmax(&logits)[target],
        })
    }

    pub(crate) fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.output_dim {
            return Err(Error::InvalidConfig(format!(
                "target class {target} out of range for {} outputs",
                self.output_dim
            )));
        }
        Ok(())
    }

    /// Gradient of the target score with respect to the output of the last
    /// layer.
    pub(crate) fn head_gradient(trace: &ForwardTrace, target: usize, head: Head) -> Vec<f64> {
        let n = trace.probabilities.len();
        match head {
            Head::Logit => {
                let mut g = vec![0.0; n];
                g[target] = 1.0;
                g
            }
            Head::Softmax => {
                let p = &trace.probabilities;
                (0..n)
                    .map(|c| {
                        let delta = if c == target { 1.0 } else { 0.0 };
                        p[target] * (delta - p[c])
                    })
                    .collect()
            }
        }
    }

    /// Back-propagates `grad_out` (w.r.t. the last activation) to the input.
    pub(crate) fn backprop(&self, trace: &ForwardTrace, grad_out: Vec<f64>) -> Vec<f64> {
        let mut g = grad_out;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            for (gi, z) in g.iter_mut().zip(&trace.pre_activations[k]) {
                *gi *= act.derivative(*z);
            }
            g = layer.backward_input(&g);
        }
        g
    }

    /// `∂ score_target / ∂ x`.
    pub fn input_gradient(&self, x: &[f64], target: usize, head: Head) -> Result<Vec<f64>> {
        self.check_target(target)?;
        let trace = self.forward_traced(x)?;
        Ok(self.backprop(&trace, Self::head_gradient(&trace, target, head)))
    }
}
