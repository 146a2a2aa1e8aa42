//! Sparse multinomial logistic regression for plan market-share analysis.
//!
//! The crate covers the whole pipeline: loading plan/enrollment files
//! ([`ingest`]), building a model-ready design matrix ([`preprocess`]),
//! fitting L1-penalized multinomial models along a λ path ([`glm`]),
//! choosing λ by cross-validated deviance ([`select`]), turning the fit into
//! odds-ratio tables ([`interpret`]) and the plan payment arithmetic
//! ([`payment`]). [`synthetic`] builds seeded stand-in datasets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod glm;
pub mod ingest;
pub mod interpret;
pub mod payment;
pub mod preprocess;
pub mod select;
pub mod synthetic;
