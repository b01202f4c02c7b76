//! Integrated Gradients, DeepLIFT (Rescale) and LRP (ε and γ rules).
//!
//! All three methods explain one scalar of the network, the target-class
//! logit by default ([`Head::Logit`]). With a zero baseline every method has
//! the missingness property: an input entry equal to zero receives exactly
//! zero attribution, because each backward pass ends by multiplying with the
//! input (or input difference).

use serde::{Deserialize, Serialize};

use crate::data::{Encoding, FeatureKind};
use crate::nn::{Head, MlpModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ig,
    DeepLift,
    Lrp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ig, Method::DeepLift, Method::Lrp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ig => "ig",
            Method::DeepLift => "deeplift",
            Method::Lrp => "lrp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Encoded,
    Collapsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionVector {
    pub values: Vec<f64>,
    pub method: Method,
    pub target: usize,
    pub space: Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrpRule {
    Epsilon,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Riemann steps for Integrated Gradients.
    pub ig_steps: usize,
    pub lrp_rule: LrpRule,
    pub epsilon: f64,
    pub gamma: f64,
    /// Reference point; `None` is the zero vector.
    pub baseline: Option<Vec<f64>>,
    /// Explain the softmax probability instead of the logit.
    pub explain_through_softmax: bool,
    /// DeepLIFT falls back to the activation derivative when `|Δz| <= tau`.
    pub deeplift_tau: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            ig_steps: 50,
            lrp_rule: LrpRule::Gamma,
            epsilon: 1e-6,
            gamma: 0.25,
            baseline: None,
            explain_through_softmax: false,
            deeplift_tau: 1e-9,
        }
    }
}

impl ExplainConfig {
    pub fn head(&self) -> Head {
        if self.explain_through_softmax {
            Head::Softmax
        } else {
            Head::Logit
        }
    }

    pub fn baseline_for(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.baseline {
            None => Ok(vec![0.0; dim]),
            Some(b) if b.len() == dim => Ok(b.clone()),
            Some(b) => Err(Error::DimensionMismatch { expected: dim, got: b.len() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ig_steps == 0 {
            return Err(Error::InvalidConfig("ig_steps must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.gamma >= 0.0) || !(self.deeplift_tau >= 0.0) {
            return Err(Error::InvalidConfig("epsilon, gamma and tau must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_finite(values: &[f64], method: Method) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite {} attribution", method.name())));
    }
    Ok(())
}

fn check_dims(model: &MlpModel, x: &[f64], baseline: &[f64]) -> Result<()> {
    for v in [x, baseline] {
        if v.len() != model.input_dim() {
            return Err(Error::DimensionMismatch { expected: model.input_dim(), got: v.len() });
        }
    }
    Ok(())
}

/// Right-endpoint Riemann approximation of Integrated Gradients:
/// `(x_j - x'_j) / s * Σ_{k=1..s} ∂f_t(x' + (x - x') k / s) / ∂x_j`.
pub fn integrated_gradients(
    model: &MlpModel,
    x: &[f64],
    baseline: &[f64],
    steps: usize,
    target: usize,
    head: Head,
) -> Result<AttributionVector> {
    if steps == 0 {
        return Err(Error::InvalidConfig("integrated gradients needs at least one step".into()));
    }
    check_dims(model, x, baseline)?;
    let diff: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    let mut total = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for k in 1..=steps {
        let frac = k as f64 / steps as f64;
        for ((p, b), d) in point.iter_mut().zip(baseline).zip(&diff) {
            *p = b + d * frac;
        }
        let g = model.input_gradient(&point, target, head)?;
        for (t, gj) in total.iter_mut().zip(&g) {
            *t += gj;
        }
    }
    let values: Vec<f64> = diff.iter().zip(&total).map(|(d, t)| d / steps as f64 * t).collect();
    check_finite(&values, Method::Ig)?;
    Ok(AttributionVector { values, method: Method::Ig, target, space: Space::Encoded })
}

/// DeepLIFT with the Rescale rule. Contributions satisfy
/// `Σ_j C_j = f_t(x) - f_t(x')` up to rounding.
pub fn deeplift_rescale(
    model: &MlpModel,
    x: &[f64],
    baseline: &[f64],
    target: usize,
    head: Head,
    tau: f64,
) -> Result<AttributionVector> {
    check_dims(model, x, baseline)?;
    model.check_target(target)?;
    let tx = model.forward_traced(x)?;
    let tb = model.forward_traced(baseline)?;

    // multipliers of the target score w.r.t. the last activation
    let mut m = match head {
        Head::Logit => {
            let mut m = vec![0.0; model.output_dim()];
            m[target] = 1.0;
            m
        }
        Head::Softmax => {
            // minimum-norm multiplier vector with m · Δlogits = Δp_t
            let dl: Vec<f64> = tx.logits().iter().zip(tb.logits()).map(|(a, b)| a - b).collect();
            let norm2: f64 = dl.iter().map(|d| d * d).sum();
            if norm2 > tau * tau {
                let dp = tx.probabilities[target] - tb.probabilities[target];
                dl.iter().map(|d| dp * d / norm2).collect()
            } else {
                MlpModel::head_gradient(&tx, target, Head::Softmax)
            }
        }
    };

    for (k, layer) in model.layers().iter().enumerate().rev() {
        let act = layer.activation();
        let zx = &tx.pre_activations[k];
        let zb = &tb.pre_activations[k];
        let ax = &tx.activations[k];
        let ab = &tb.activations[k];
        for i in 0..m.len() {
            let dz = zx[i] - zb[i];
            let slope = if dz.abs() > tau { (ax[i] - ab[i]) / dz } else { act.derivative(zx[i]) };
            m[i] *= slope;
        }
        m = layer.backward_input(&m);
    }

    let values: Vec<f64> = m.iter().zip(x.iter().zip(baseline)).map(|(mj, (a, b))| mj * (a - b)).collect();
    check_finite(&values, Method::DeepLift)?;

    let delta = tx.score(target, head) - tb.score(target, head);
    let sum: f64 = values.iter().sum();
    let scale = delta.abs().max(tx.score(target, head).abs()).max(1e-12);
    if (sum - delta).abs() > 1e-9 * scale {
        log::warn!("deeplift summation-to-delta residual {:.3e} (delta {delta:.6e})", sum - delta);
    }
    Ok(AttributionVector { values, method: Method::DeepLift, target, space: Space::Encoded })
}

/// Layer-wise relevance propagation.
///
/// Each dense layer redistributes relevance with
/// `R_j = Σ_k a_j w'_jk / (z'_k + ε·sign(z'_k)) R_k`, where
/// `w' = w + γ·max(w, 0)` and `z'_k = Σ_j a_j w'_jk + b_k`. The epsilon rule is
/// the `γ = 0` case. Activations pass relevance through unchanged. The
/// output neuron `target` is seeded with its score.
pub fn lrp(
    model: &MlpModel,
    x: &[f64],
    rule: LrpRule,
    epsilon: f64,
    gamma: f64,
    target: usize,
    head: Head,
) -> Result<AttributionVector> {
    model.check_target(target)?;
    let trace = model.forward_traced(x)?;
    let gamma = match rule {
        LrpRule::Epsilon => 0.0,
        LrpRule::Gamma => gamma,
    };
    let mut relevance = vec![0.0; model.output_dim()];
    relevance[target] = trace.score(target, head);
    let mut vanished = 0usize;

    for (k, layer) in model.layers().iter().enumerate().rev() {
        let input = trace.layer_input(k);
        let mut next = vec![0.0; layer.cols()];
        for (r, rel) in relevance.iter().enumerate() {
            if *rel == 0.0 {
                continue;
            }
            let row = layer.row(r);
            let z: f64 = row.iter().zip(input).map(|(w, a)| a * (w + gamma * w.max(0.0))).sum::<f64>()
                + layer.bias()[r];
            let denom = z + if z >= 0.0 { epsilon } else { -epsilon };
            if denom.abs() < f64::MIN_POSITIVE {
                vanished += 1;
                continue;
            }
            let s = rel / denom;
            for ((n, w), a) in next.iter_mut().zip(row).zip(input) {
                *n += a * (w + gamma * w.max(0.0)) * s;
            }
        }
        relevance = next;
    }
    if vanished > 0 {
        log::warn!("lrp: {vanished} neuron(s) with vanishing denominator dropped their relevance");
    }
    check_finite(&relevance, Method::Lrp)?;
    Ok(AttributionVector { values: relevance, method: Method::Lrp, target, space: Space::Encoded })
}

/// Collapses an encoded attribution to one value per original feature:
/// numerics copy through, a categorical feature takes the attribution of
/// the modality observed in `x`.
pub fn reverse_encode(attr: &AttributionVector, encoding: &Encoding, x: &[f64]) -> Result<AttributionVector> {
    if attr.space != Space::Encoded {
        return Err(Error::InvalidConfig("attribution is already collapsed".into()));
    }
    let width = encoding.width();
    for len in [attr.values.len(), x.len()] {
        if len != width {
            return Err(Error::DimensionMismatch { expected: width, got: len });
        }
    }
    let values = encoding
        .features
        .iter()
        .enumerate()
        .map(|(fi, f)| match f.kind {
            FeatureKind::Numeric => attr.values[f.start],
            FeatureKind::Categorical => attr.values[f.start + encoding.hot_index(x, fi)],
        })
        .collect();
    Ok(AttributionVector { values, method: attr.method, target: attr.target, space: Space::Collapsed })
}

/// The three collapsed attributions of one point, explained at its
/// predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub target: usize,
    pub ig: AttributionVector,
    pub deeplift: AttributionVector,
    pub lrp: AttributionVector,
}

impl Explanation {
    pub fn get(&self, method: Method) -> &AttributionVector {
        match method {
            Method::Ig => &self.ig,
            Method::DeepLift => &self.deeplift,
            Method::Lrp => &self.lrp,
        }
    }

    pub fn vectors(&self) -> [&[f64]; 3] {
        [&self.ig.values, &self.deeplift.values, &self.lrp.values]
    }
}

/// Encoded-space attributions of all three methods at `target`.
pub fn explain_encoded(model: &MlpModel, x: &[f64], target: usize, cfg: &ExplainConfig) -> Result<[AttributionVector; 3]> {
    let baseline = cfg.baseline_for(model.input_dim())?;
    let head = cfg.head();
    Ok([
        integrated_gradients(model, x, &baseline, cfg.ig_steps, target, head)?,
        deeplift_rescale(model, x, &baseline, target, head, cfg.deeplift_tau)?,
        lrp(model, x, cfg.lrp_rule, cfg.epsilon, cfg.gamma, target, head)?,
    ])
}

/// IG, DeepLIFT and LRP at the predicted class, reverse-encoded.
pub fn explain_all(model: &MlpModel, x: &[f64], encoding: &Encoding, cfg: &ExplainConfig) -> Result<Explanation> {
    let target = model.predict_class(x)?;
    let [ig, dl, lrp] = explain_encoded(model, x, target, cfg)?;
    Ok(Explanation {
        target,
        ig: reverse_encode(&ig, encoding, x)?,
        deeplift: reverse_encode(&dl, encoding, x)?,
        lrp: reverse_encode(&lrp, encoding, x)?,
    })
}
