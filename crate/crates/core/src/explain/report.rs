use serde::{Deserialize, Serialize};

use super::{PermResult, ShapSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub mean_signed_shap: f64,
    pub perm_mean: Option<f64>,
    pub perm_std: Option<f64>,
    /// 1-based rank by mean absolute Shapley value.
    pub rank: usize,
}

/// Per-feature attribution summary, ordered by rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Joins Shapley means with permutation importance (when available) by
    /// feature name. Equal mean absolute values keep the model's column order.
    pub fn build(shap: &ShapSummary, perm: Option<&PermResult>) -> Result<Self> {
        let mut order: Vec<usize> = (0..shap.features.len()).collect();
        order.sort_by(|&a, &b| shap.mean_abs[b].total_cmp(&shap.mean_abs[a]));
        let features = order
            .into_iter()
            .enumerate()
            .map(|(k, j)| {
                let name = &shap.features[j];
                let p = match perm {
                    Some(p) => Some(
                        p.features
                            .iter()
                            .find(|f| &f.feature == name)
                            .ok_or_else(|| Error::Schema(format!("no permutation importance for `{name}`")))?,
                    ),
                    None => None,
                };
                Ok(FeatureImportance {
                    feature: name.clone(),
                    mean_abs_shap: shap.mean_abs[j],
                    mean_signed_shap: shap.mean_signed[j],
                    perm_mean: p.map(|p| p.mean),
                    perm_std: p.map(|p| p.std),
                    rank: k + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ImportanceReport { features })
    }

    pub fn top(&self) -> Option<&str> {
        self.features.first().map(|f| f.feature.as_str())
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.feature == feature)
    }
}
