//! Factor-influence analysis for binary hourly event occurrence.
//!
//! The crate covers the whole pipeline: ingestion and spatial imputation of
//! sensor readings, classical dependency statistics (correlation,
//! chi-squared, t-test, Weight-of-Evidence / Information Value), three
//! probability models (boosted trees, a multilayer perceptron and an
//! hour-only prior), model attribution (SHAP, permutation importance),
//! evaluation (ROC AUC, class-zero precision curves, γ-precision) and a
//! synthetic scenario generator with an analytically known Bayes AUC.

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod models;
pub mod pipeline;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
