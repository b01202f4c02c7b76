mod common;

use proptest::prelude::*;

use common::case;
use robustcheck_core::attributions::{deeplift_rescale, integrated_gradients, lrp, LrpRule};
use robustcheck_core::nn::{Activation, Head, MlpModel};

fn logit(model: &MlpModel, x: &[f64], t: usize) -> f64 {
    model.logits(x).unwrap()[t]
}

/// Layers `k..` of `model` as a network of their own.
fn tail(model: &MlpModel, k: usize) -> MlpModel {
    MlpModel::new(model.layers()[k..].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn zero_entries_get_zero_attribution(seed in any::<u64>(), mask in any::<u32>()) {
        let (model, mut x, t) = case(seed, Activation::Relu, true);
        for (j, v) in x.iter_mut().enumerate() {
            if mask >> j & 1 == 1 {
                *v = 0.0;
            }
        }
        let base = vec![0.0; x.len()];
        let all = [
            integrated_gradients(&model, &x, &base, 20, t, Head::Logit).unwrap().values,
            deeplift_rescale(&model, &x, &base, t, Head::Logit, 1e-9).unwrap().values,
            lrp(&model, &x, LrpRule::Epsilon, 1e-6, 0.0, t, Head::Logit).unwrap().values,
            lrp(&model, &x, LrpRule::Gamma, 1e-6, 0.25, t, Head::Logit).unwrap().values,
        ];
        for a in &all {
            for j in (0..x.len()).filter(|&j| x[j] == 0.0) {
                prop_assert_eq!(a[j], 0.0);
            }
        }
    }

    #[test]
    fn deeplift_sums_to_delta(seed in any::<u64>(), through_softmax in any::<bool>()) {
        let (model, x, t) = case(seed, Activation::Relu, true);
        let head = if through_softmax { Head::Softmax } else { Head::Logit };
        let base = vec![0.0; x.len()];
        let delta = model.score(&x, t, head).unwrap() - model.score(&base, t, head).unwrap();
        let sum: f64 = deeplift_rescale(&model, &x, &base, t, head, 1e-9).unwrap().values.iter().sum();
        prop_assert!((sum - delta).abs() <= 1e-9 * delta.abs().max(1.0), "{sum} vs {delta}");
    }

    #[test]
    fn ig_converges_between_300_and_600_steps(seed in any::<u64>()) {
        let (model, x, t) = case(seed, Activation::Relu, true);
        let base = vec![0.0; x.len()];
        let ig = |s| integrated_gradients(&model, &x, &base, s, t, Head::Logit).unwrap().values;
        let (ig300, ig600, reference) = (ig(300), ig(600), ig(20_000));
        let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        // per-feature errors can cancel in the completeness sum, so the
        // s=300 error is measured against a fine-step reference instead
        let change = sup(&ig300, &ig600);
        let error = sup(&ig300, &reference);
        prop_assert!(change <= 10.0 * error + 1e-12, "change {change}, error {error}");
    }

    #[test]
    fn lrp_conserves_relevance_layer_by_layer(seed in any::<u64>()) {
        let eps = 1e-6;
        let (model, x, t) = case(seed, Activation::Relu, false);
        let f = logit(&model, &x, t);
        let trace = model.forward_traced(&x).unwrap();
        // relevance reaching the input of layer k is what LRP returns on the tail net
        for k in 0..model.layers().len() {
            let sub = tail(&model, k);
            let input = trace.layer_input(k);
            let r: f64 = lrp(&sub, input, LrpRule::Epsilon, eps, 0.0, t, Head::Logit).unwrap().values.iter().sum();
            let fan_in: usize = model.layers()[k..].iter().map(|l| l.cols()).sum();
            let min_z = trace.pre_activations[k..]
                .iter()
                .flatten()
                .filter(|z| **z > 0.0)
                .fold(f64::INFINITY, |a, &b| a.min(b));
            // each stabilised division loses at most eps / (|z| + eps) of its relevance
            let slack = eps * fan_in as f64 * f.abs().max(1.0) / min_z.min(1.0);
            prop_assert!((r - f).abs() <= slack, "layer {k}: {r} vs {f}, slack {slack}");
        }
    }

    #[test]
    fn identity_nets_have_closed_form_attributions(seed in any::<u64>()) {
        let (model, x, t) = case(seed, Activation::Identity, true);
        let base: Vec<f64> = x.iter().map(|v| 0.5 - v).collect();
        let mut w: Vec<f64> = (0..model.output_dim()).map(|k| if k == t { 1.0 } else { 0.0 }).collect();
        for layer in model.layers().iter().rev() {
            w = (0..layer.cols()).map(|c| (0..layer.rows()).map(|r| w[r] * layer.weight(r, c)).sum()).collect();
        }
        let ig = integrated_gradients(&model, &x, &base, 7, t, Head::Logit).unwrap().values;
        let dl = deeplift_rescale(&model, &x, &base, t, Head::Logit, 1e-9).unwrap().values;
        for j in 0..x.len() {
            let expect = w[j] * (x[j] - base[j]);
            prop_assert!((ig[j] - expect).abs() <= 1e-9);
            prop_assert!((dl[j] - expect).abs() <= 1e-9);
        }
    }
}
