//! Pipeline stages behind the `planshare` binary. Each stage reads the
//! artifacts of the stages before it from the output directory and writes
//! its own.

use std::path::PathBuf;

use planshare_core::glm::GlmError;
use planshare_core::ingest::IngestError;
use planshare_core::interpret::InterpretError;
use planshare_core::payment::PaymentError;
use planshare_core::preprocess::PreprocessError;
use planshare_core::select::SelectError;

pub mod commands;
pub mod config;

pub use commands::*;
pub use config::{Overrides, Paths, RunConfig};

/// File names inside the output directory.
pub mod artifacts {
    pub const DATASET: &str = "dataset.csv";
    pub const TRAIN_DESIGN: &str = "train_design.csv";
    pub const TEST_DESIGN: &str = "test_design.csv";
    pub const TRANSFORM: &str = "transform.json";
    pub const PREPROCESS_REPORT: &str = "preprocess_report.json";
    pub const CV_REPORT: &str = "cv_report.csv";
    pub const LAMBDA: &str = "lambda.json";
    pub const MODEL: &str = "model.json";
    pub const EVALUATION: &str = "evaluation.json";
    pub const ODDS_CSV: &str = "odds_ratios.csv";
    pub const ODDS_MD: &str = "odds_ratios.md";
    pub const NOT_SIGNIFICANT: &str = "not_significant.txt";
    pub const PAYMENT_RESULTS: &str = "payment_results.csv";
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing {what}: {}", path.display())]
    MissingInput { path: PathBuf, what: &'static str },
    #[error("{0} is not set (config file or command-line flag)")]
    Unset(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Interpret(#[from] InterpretError),
    #[error(transparent)]
    Payment(#[from] PaymentError),
}

impl CliError {
    /// 2 when an input file or upstream artifact is absent, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput { .. } | CliError::Ingest(IngestError::MissingFile { .. }) => 2,
            _ => 1,
        }
    }
}
