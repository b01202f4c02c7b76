//! Tabular data: schema, CSV ingestion, preprocessing, splitting and
//! synthetic generators.

mod preprocess;
mod schema;
mod split;
pub mod swiss_roll;
pub mod synthetic;
mod table;

pub use preprocess::{
    correlation_stats, fit_encoding, preprocess, read_dataset_csv, transform, write_dataset_csv, ColumnRef,
    Correlation, DropReason, DroppedFeature, EncodedFeature, Encoding, FeatureKind, PreprocessConfig,
    PreprocessedDataset, Scaler, Splits,
};
pub use schema::{ColumnKind, ColumnSpec, FeatureSchema};
pub use split::{SplitIndices, SplitSizes, SplitSpec};
pub use swiss_roll::{distance_to_roll, swiss_roll, SwissRoll};
pub use table::{load_csv, read_csv, RawColumn, RawTable};
