//! Ranking and class-zero precision metrics.

mod auc;
mod precision;

pub use auc::{roc_auc, roc_curve, RocPoint};
pub use precision::{gamma_precision, precision_curve, GammaPrecision, PrecisionCurve, PrecisionPoint, DEFAULT_GAMMA};
