//! L1-penalized multinomial logistic regression.
//!
//! The model is the symmetric parameterization: one coefficient vector per
//! class, `P(Y = k | x) = exp(η_k) / Σ_l exp(η_l)` with `η_k = β_0k + Σ_j β_jk x_j`.
//! Coefficients minimize `(1/n)·deviance + λ·Σ_{j≥1,k} |β_jk|` and are
//! computed along a decreasing λ path by [`fit_path`].

mod artifact;
mod likelihood;
mod solver;
mod types;

pub use artifact::ModelArtifact;
pub(crate) use likelihood::deviance_from_eta;
pub use likelihood::{
    deviance_gradient, l1_norm, multinomial_deviance, penalized_objective,
    penalized_objective_with, predict, probabilities, softmax_probs,
};
pub use solver::{
    fit_lambda, fit_path, fit_path_traced, fit_path_with_lambdas, lambda_grid, lambda_max,
    lambda_max_with, null_model, soft_threshold, TraceEvent, WEIGHT_FLOOR,
};
pub use types::{
    ClassLabels, CoefficientTensor, DesignMatrix, PathEntry, PathResult, SolverConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum GlmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("lambda must be a finite value >= 0, got {0}")]
    NegativeLambda(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("degenerate design: {0}")]
    Degenerate(String),
}
