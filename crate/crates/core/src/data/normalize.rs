use serde::{Deserialize, Serialize};

use super::{Column, FeatureTable};
use crate::{Error, Result};

/// Per-column `(min, max)` bounds fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxBounds {
    pub columns: Vec<ColumnBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnBounds {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnBounds {
    fn scale(&self, x: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            ((x - self.min) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

impl MinMaxBounds {
    /// Rescales the continuous columns of `table` with these bounds,
    /// clipping to `[0, 1]`. Categorical columns are left untouched.
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        let columns = table
            .columns()
            .iter()
            .map(|col| {
                if !col.kind().is_continuous() {
                    return Ok(col.clone());
                }
                let b = self
                    .columns
                    .iter()
                    .find(|b| b.name == col.name())
                    .ok_or_else(|| Error::Lookup {
                        kind: "normalization bounds for column",
                        id: col.name().to_string(),
                    })?;
                Ok(col.map_observed(|x| b.scale(x)))
            })
            .collect::<Result<Vec<Column>>>()?;
        table.with_columns(columns)
    }
}

/// Min–max rescaling of every continuous column to `[0, 1]`.
///
/// A constant column maps to all zeros. The returned bounds rescale later
/// (evaluation) data consistently.
pub fn normalize_minmax(table: &FeatureTable) -> Result<(FeatureTable, MinMaxBounds)> {
    let mut bounds = Vec::new();
    for col in table.columns().iter().filter(|c| c.kind().is_continuous()) {
        let (lo, hi) = col
            .observed()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if lo > hi {
            return Err(Error::EmptyColumn(col.name().to_string()));
        }
        bounds.push(ColumnBounds {
            name: col.name().to_string(),
            min: lo,
            max: hi,
        });
    }
    let bounds = MinMaxBounds { columns: bounds };
    Ok((bounds.apply(table)?, bounds))
}
