//! Command-line pipeline: preprocess, train three models, fit the medoid
//! index, score validation robustness, fit the trust model, assess the test
//! split and validate against model agreement.

pub mod config;
mod error;
pub mod manifest;
pub mod stages;

pub use config::{DatasetSource, Overrides, RunConfig};
pub use error::CliError;
pub use manifest::{Layout, RunManifest};
pub use stages::{run_pipeline, run_stage, Stage};
