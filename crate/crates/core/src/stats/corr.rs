use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::{Error, Result};

/// Name given to the label in a correlation matrix that includes it.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub names: Vec<String>,
    /// Row-major, symmetric, unit diagonal.
    pub values: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl CorrMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }
}

/// Pearson correlation over pairs where both values are present; `None`
/// when fewer than two pairs remain or either side is constant.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between every pair of features (and the label when
/// `include_label`). A constant column correlates 0 with every other column
/// and produces a warning.
pub fn pearson_corr_matrix(table: &FeatureTable, include_label: bool) -> Result<CorrMatrix> {
    if table.n_rows() < 2 {
        return Err(Error::Degenerate("correlation needs at least two rows".into()));
    }
    let mut names = table.feature_names();
    let mut cols: Vec<Vec<Option<f64>>> = table.columns().iter().map(|c| c.iter().collect()).collect();
    if include_label {
        names.push(LABEL_COLUMN.to_string());
        cols.push(table.labels().iter().map(|&l| Some(f64::from(l))).collect());
    }
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    let mut warnings = Vec::new();
    for i in 0..k {
        values[i][i] = 1.0;
        let distinct = {
            let mut it = cols[i].iter().flatten();
            it.next().is_some_and(|first| it.any(|v| v != first))
        };
        if !distinct {
            warnings.push(format!(
                "column `{}` is constant; its correlations are set to 0",
                names[i]
            ));
        }
        for j in (i + 1)..k {
            let r = pearson(&cols[i], &cols[j]).unwrap_or(0.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrMatrix {
        names,
        values,
        warnings,
    })
}
