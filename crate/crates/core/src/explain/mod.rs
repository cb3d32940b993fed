//! Feature attribution: Shapley values with mean-imputed absent features,
//! and permutation importance.

mod permutation;
mod report;
mod shap;

pub use permutation::{permutation_importance, PermConfig, PermImportance, PermLoss, PermResult, Perturbation};
pub use report::{FeatureImportance, ImportanceReport};
pub use shap::{mean_shap, shap_values, ShapConfig, ShapMode, ShapSummary, ShapValues, MAX_EXACT_FEATURES};
