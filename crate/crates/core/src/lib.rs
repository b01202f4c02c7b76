//! Robustness analysis for neural-network feature attributions.
//!
//! The crate is organised around the stages of a robustness assessment:
//!
//! - [`nn`]: a small dense feed-forward classifier with traced forward passes.
//! - [`data`]: CSV ingestion, preprocessing, splitting and synthetic datasets.
//! - [`attributions`]: Integrated Gradients, DeepLIFT (Rescale) and LRP (ε / γ),
//!   plus reverse encoding of one-hot blocks.
//! - [`neighbourhood`]: random and medoid-based perturbation sets, the
//!   same-prediction filter and retention tuning.
//! - [`aggregation`]: the rank ensemble and the unit-norm mean.
//! - [`robustness`]: the Spearman estimator, the knn robustness regressor,
//!   trust labels and the model-agreement ROC validation.
//!
//! All randomness is seeded; every public operation is deterministic given
//! its inputs.

pub mod aggregation;
pub mod attributions;
pub mod data;
mod error;
pub mod neighbourhood;
pub mod nn;
pub mod robustness;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
