//! Raw table to design matrix: drops, aggregates, screening, scaling,
//! one-hot encoding and market-share bucketing.

mod dataset;
mod encode;
mod pipeline;
mod stats;

pub use dataset::{
    read_design_csv, write_design_csv, ColumnData, RawColumn, RawDataset, CLASS_COLUMN,
};
pub use encode::{
    bucket_market_share, column_range, min_max_normalize, one_hot_encode, DEFAULT_CUTPOINTS,
};
pub use pipeline::{
    drop_zero_variance, run_preprocess, Aggregate, ColumnTransform, CorrelationReport, DropReason,
    DroppedFeature, EncodedDataset, FeatureKind, PreprocessConfig, PreprocessReport, Preprocessed,
    Transform, Vif, VifMode,
};
pub use stats::{correlation_matrix, variance_inflation_factors};

use thiserror::Error;

use crate::glm::GlmError;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least {needed} rows, got {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("constant column: {0}")]
    ConstantColumn(String),
    #[error("ill-posed: {rows} rows for {columns} columns")]
    IllPosed { rows: usize, columns: usize },
    #[error("value {value:?} not among levels {levels:?}")]
    UnseenLevel { value: String, levels: Vec<String> },
    #[error("share {share} outside [{lo}, {hi})")]
    ShareOutOfRange { share: f64, lo: f64, hi: f64 },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("empty cell at row {row}, column {column:?}")]
    MissingValue { row: usize, column: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
