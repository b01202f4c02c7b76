//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, MlpModel};
use crate::{Error, Result};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerFile>,
}

pub fn model_to_json(model: &MlpModel) -> String {
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        input_dim: model.input_dim(),
        output_dim: model.output_dim(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerFile {
                rows: l.rows(),
                cols: l.cols(),
                weights: l.weights().to_vec(),
                bias: l.bias().to_vec(),
                activation: l.activation(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("model serialisation cannot fail")
}

pub fn model_from_json(text: &str) -> Result<MlpModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelFile(format!("malformed: {e}")))?;
    if file.version != MODEL_FILE_VERSION {
        return Err(Error::ModelFile(format!(
            "unsupported version {} (expected {MODEL_FILE_VERSION})",
            file.version
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            DenseLayer::new(l.rows, l.cols, l.weights, l.bias, l.activation)
                .map_err(|e| Error::ModelFile(format!("layer {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = MlpModel::new(layers).map_err(|e| Error::ModelFile(format!("layer chain: {e}")))?;
    if model.input_dim() != file.input_dim || model.output_dim() != file.output_dim {
        return Err(Error::ModelFile(format!(
            "declared dims {}→{} do not match layers {}→{}",
            file.input_dim,
            file.output_dim,
            model.input_dim(),
            model.output_dim()
        )));
    }
    Ok(model)
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    model_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tests::random_model;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = random_model(5, &[4, 9, 3], Activation::Tanh, true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(m, back);
        let mut rng = seed::rng(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(m.forward(&x).unwrap(), back.forward(&x).unwrap());
        }
    }

    #[test]
    fn truncated_file_fails() {
        let text = model_to_json(&random_model(6, &[2, 2], Activation::Relu, true));
        let cut = &text[..text.len() / 2];
        assert!(matches!(model_from_json(cut), Err(Error::ModelFile(_))));
    }

    #[test]
    fn version_and_shape_errors() {
        let bad_version = r#"{"version":2,"input_dim":1,"output_dim":1,"layers":[]}"#;
        assert!(model_from_json(bad_version).unwrap_err().to_string().contains("version"));
        let bad_shape = r#"{"version":1,"input_dim":2,"output_dim":1,"layers":[
            {"rows":1,"cols":2,"weights":[1.0],"bias":[0.0],"activation":"identity"}]}"#;
        assert!(model_from_json(bad_shape).is_err());
        let bad_dims = r#"{"version":1,"input_dim":3,"output_dim":1,"layers":[
            {"rows":1,"cols":2,"weights":[1.0,2.0],"bias":[0.0],"activation":"identity"}]}"#;
        assert!(model_from_json(bad_dims).is_err());
    }

    #[test]
    fn hand_written_file() {
        let text = r#"{"version":1,"input_dim":2,"output_dim":2,"layers":[
            {"rows":2,"cols":2,"weights":[1.0,0.0,0.0,1.0],"bias":[0.0,1.0],"activation":"identity"}]}"#;
        let m = model_from_json(text).unwrap();
        // logits (1, 1) at x = (1, 0): equal, uniform softmax
        assert_eq!(m.forward(&[1.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        // logits (2, 1): p0 = 1 / (1 + e^-1)
        let p = m.forward(&[2.0, 0.0]).unwrap();
        assert!((p[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }
}
