//! Classical dependency statistics between a feature and the event label.

mod corr;
mod hypothesis;
pub mod special;
mod woe;

pub use corr::{pearson, pearson_corr_matrix, CorrMatrix, LABEL_COLUMN};
pub use hypothesis::{
    chi_squared_contingency, chi_squared_test, t_test, t_test_two_sample, TTestVariant, TestMethod, TestResult,
};
pub use woe::{information_value, woe_bins, IvBand, IvResult, WoeBin, DEFAULT_CONTINUOUS_BINS};
