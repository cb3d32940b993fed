use crate::data::FeatureTable;
use crate::{Error, Result};

/// Dense row-major design matrix with binary labels, the input of every
/// model and attribution method.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    data: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let m = names.len();
        if rows.len() != labels.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::Schema(format!("row has {} values, expected {m}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::validated(names, data, labels)
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Schema("column names and columns differ in count".into()));
        }
        let n = labels.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Schema("column length differs from label count".into()));
        }
        let m = columns.len();
        let mut data = vec![0.0; n * m];
        for (j, c) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                data[i * m + j] = *v;
            }
        }
        Self::validated(names, data, labels)
    }

    fn validated(names: Vec<String>, data: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite feature value {v}")));
        }
        if let Some(l) = labels.iter().find(|l| **l > 1) {
            return Err(Error::Domain(format!("label {l} is not binary")));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Schema(format!("duplicate feature `{n}`")));
            }
        }
        Ok(Dataset { names, data, labels })
    }

    /// Rows with any missing cell are dropped; returns the dataset and the
    /// number of dropped rows.
    pub fn from_table(table: &FeatureTable) -> Result<(Self, usize)> {
        let cols = table.columns();
        let keep: Vec<usize> = (0..table.n_rows())
            .filter(|&i| cols.iter().all(|c| !c.is_missing(i)))
            .collect();
        let m = cols.len();
        let mut data = Vec::with_capacity(keep.len() * m);
        for &i in &keep {
            data.extend(cols.iter().map(|c| c.raw_values()[i]));
        }
        let labels = keep.iter().map(|&i| table.labels()[i]).collect();
        let ds = Self::validated(table.feature_names(), data, labels)?;
        Ok((ds, table.n_rows() - keep.len()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.names.len();
        &self.data[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.names.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, j)).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Column means, used as the attribution background.
    pub fn means(&self) -> Vec<f64> {
        let n = self.n_rows().max(1) as f64;
        (0..self.n_features())
            .map(|j| (0..self.n_rows()).map(|i| self.value(i, j)).sum::<f64>() / n)
            .collect()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Reorders (and subsets) the columns to `names`.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::Schema(format!("dataset lacks feature `{n}`")))
            })
            .collect::<Result<Vec<usize>>>()?;
        if idx.iter().copied().eq(0..self.n_features()) && names.len() == self.n_features() {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            data.extend(idx.iter().map(|&j| self.value(i, j)));
        }
        Ok(Dataset {
            names: names.to_vec(),
            data,
            labels: self.labels.clone(),
        })
    }

    /// Copy with column `j` replaced.
    pub fn with_column(&self, j: usize, values: &[f64]) -> Dataset {
        let mut out = self.clone();
        let m = self.n_features();
        for (i, v) in values.iter().enumerate() {
            out.data[i * m + j] = *v;
        }
        out
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut data = Vec::with_capacity(rows.len() * self.n_features());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Dataset {
            names: self.names.clone(),
            data,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let m = self.n_features();
        Dataset {
            names: self.names.clone(),
            data: self.data[start * m..end * m].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let pos = self.n_positive();
        if self.n_rows() < 2 || pos == 0 || pos == self.n_rows() {
            return Err(Error::Degenerate(
                "training needs at least two rows covering both label classes".into(),
            ));
        }
        Ok(())
    }
}
