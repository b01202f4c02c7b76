use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    ParseCell { row: usize, column: String, value: String },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("row {row}, column `{column}`: unknown category {value:?}")]
    UnknownCategory { row: usize, column: String, value: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("k-medoids: {0}")]
    Clustering(String),

    #[error("empty neighbourhood for point {0}: no perturbation kept the predicted class, retune the generator")]
    EmptyNeighbourhood(usize),

    #[error("ROC undefined: {0}")]
    RocUndefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
