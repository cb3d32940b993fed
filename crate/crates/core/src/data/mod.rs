//! Tabular data model: hourly feature tables, labels and per-station statistics.

mod io;
mod labels;
mod normalize;
mod split;
mod time;

pub use io::{
    build_feature_table, format_timestamp, load_feature_table, parse_events, parse_readings, parse_timestamp,
    read_events, read_readings, Events, Readings, SeriesKey,
};
pub use labels::{binarize_labels, filter_stations, StationStats, DEFAULT_MULTI_EVENT_THRESHOLD};
pub use normalize::{normalize_minmax, MinMaxBounds};
pub use split::{default_eval_start, split_at};
pub use time::{encode_time, hour_index, TimeEncoding, TIME_FEATURES};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How a feature column is interpreted by binning and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureKind {
    Continuous,
    /// Values are `class / (classes - 1)` for `class` in `0..classes`.
    Categorical {
        classes: usize,
    },
}

impl FeatureKind {
    pub fn is_continuous(self) -> bool {
        matches!(self, FeatureKind::Continuous)
    }

    /// Class index of a normalized categorical value.
    pub fn class_of(self, value: f64) -> Option<usize> {
        match self {
            FeatureKind::Continuous => None,
            FeatureKind::Categorical { classes } => {
                let top = classes.saturating_sub(1);
                let idx = (value * top as f64).round();
                Some((idx.max(0.0) as usize).min(top))
            }
        }
    }
}

/// One named feature column with an explicit missing-cell mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "ColumnRepr", try_from = "ColumnRepr")]
pub struct Column {
    name: String,
    kind: FeatureKind,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.iter().eq(other.iter())
    }
}

#[derive(Serialize, Deserialize)]
struct ColumnRepr {
    name: String,
    #[serde(flatten)]
    kind: FeatureKind,
    values: Vec<Option<f64>>,
}

impl From<Column> for ColumnRepr {
    fn from(c: Column) -> Self {
        let values = c.iter().collect();
        ColumnRepr {
            name: c.name,
            kind: c.kind,
            values,
        }
    }
}

impl TryFrom<ColumnRepr> for Column {
    type Error = Error;

    fn try_from(r: ColumnRepr) -> Result<Self> {
        if r.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("column `{}` holds non-finite values", r.name)));
        }
        Ok(Column::from_options(r.name, r.kind, &r.values))
    }
}

impl Column {
    /// A fully observed column.
    pub fn dense(name: impl Into<String>, kind: FeatureKind, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Column {
            name: name.into(),
            kind,
            values,
            missing,
        }
    }

    pub fn from_options(name: impl Into<String>, kind: FeatureKind, cells: &[Option<f64>]) -> Self {
        let values = cells.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
        let missing = cells.iter().map(|c| c.is_none()).collect();
        Column {
            name: name.into(),
            kind,
            values,
            missing,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<f64> {
        (!self.missing[row]).then(|| self.values[row])
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    /// Raw values; missing cells hold NaN.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.iter().flatten()
    }

    pub(crate) fn map_observed(&self, f: impl Fn(f64) -> f64) -> Column {
        let cells: Vec<Option<f64>> = self.iter().map(|c| c.map(&f)).collect();
        Column::from_options(self.name.clone(), self.kind, &cells)
    }

    fn select(&self, rows: &[usize]) -> Column {
        Column {
            name: self.name.clone(),
            kind: self.kind,
            values: rows.iter().map(|&r| self.values[r]).collect(),
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
        }
    }
}

/// Hourly feature matrix plus binary labels for a single station.
///
/// Immutable once built; all transformations return a new table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct FeatureTable {
    station_id: String,
    timestamps: Vec<NaiveDateTime>,
    columns: Vec<Column>,
    labels: Vec<u8>,
    counts: Option<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    station_id: String,
    timestamps: Vec<NaiveDateTime>,
    columns: Vec<Column>,
    labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<i64>>,
}

impl From<FeatureTable> for TableRepr {
    fn from(t: FeatureTable) -> Self {
        TableRepr {
            station_id: t.station_id,
            timestamps: t.timestamps,
            columns: t.columns,
            labels: t.labels,
            counts: t.counts,
        }
    }
}

impl TryFrom<TableRepr> for FeatureTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        let table = FeatureTable::new(r.station_id, r.timestamps, r.columns, r.labels)?;
        match r.counts {
            Some(c) => table.with_counts(c),
            None => Ok(table),
        }
    }
}

impl FeatureTable {
    /// Validates shape, hourly spacing, unique column names and binary labels.
    pub fn new(
        station_id: impl Into<String>,
        timestamps: Vec<NaiveDateTime>,
        columns: Vec<Column>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n = timestamps.len();
        if labels.len() != n {
            return Err(Error::Schema(format!(
                "label column has {} rows, expected {n}",
                labels.len()
            )));
        }
        for c in &columns {
            if c.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, expected {n}",
                    c.name,
                    c.len()
                )));
            }
            if let FeatureKind::Categorical { classes } = c.kind {
                if classes < 2 {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` needs at least 2 classes",
                        c.name
                    )));
                }
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        for w in timestamps.windows(2) {
            if w[1] - w[0] != Duration::hours(1) {
                return Err(Error::Schema(format!(
                    "timestamps must advance by exactly one hour ({} -> {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Schema(format!("label {bad} is not binary")));
        }
        Ok(FeatureTable {
            station_id: station_id.into(),
            timestamps,
            columns,
            labels,
            counts: None,
        })
    }

    /// Attaches the raw per-hour event counts the labels were derived from.
    pub fn with_counts(mut self, counts: Vec<i64>) -> Result<Self> {
        if counts.len() != self.n_rows() {
            return Err(Error::Schema("count column length mismatch".into()));
        }
        self.counts = Some(counts);
        Ok(self)
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn counts(&self) -> Option<&[i64]> {
        self.counts.as_deref()
    }

    pub fn with_columns(&self, columns: Vec<Column>) -> Result<Self> {
        let t = FeatureTable::new(
            self.station_id.clone(),
            self.timestamps.clone(),
            columns,
            self.labels.clone(),
        )?;
        match &self.counts {
            Some(c) => t.with_counts(c.clone()),
            None => Ok(t),
        }
    }

    pub fn with_column(&self, column: Column) -> Result<Self> {
        let mut cols = self.columns.clone();
        cols.push(column);
        self.with_columns(cols)
    }

    /// Appends normalized hour, weekday and month columns derived from the
    /// timestamps.
    pub fn with_time_features(&self) -> Result<Self> {
        let enc: Vec<TimeEncoding> = self.timestamps.iter().map(|t| encode_time(*t)).collect();
        let mut cols = self.columns.clone();
        cols.push(Column::dense(
            TIME_FEATURES[0],
            FeatureKind::Categorical { classes: 24 },
            enc.iter().map(|e| e.hour).collect(),
        ));
        cols.push(Column::dense(
            TIME_FEATURES[1],
            FeatureKind::Categorical { classes: 7 },
            enc.iter().map(|e| e.weekday).collect(),
        ));
        cols.push(Column::dense(
            TIME_FEATURES[2],
            FeatureKind::Categorical { classes: 12 },
            enc.iter().map(|e| e.month).collect(),
        ));
        self.with_columns(cols)
    }

    /// Contiguous row range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let rows: Vec<usize> = (start..end).collect();
        FeatureTable {
            station_id: self.station_id.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            columns: self.columns.iter().map(|c| c.select(&rows)).collect(),
            labels: self.labels[start..end].to_vec(),
            counts: self.counts.as_ref().map(|c| c[start..end].to_vec()),
        }
    }

    pub fn stats(&self) -> Result<StationStats> {
        match &self.counts {
            Some(c) => StationStats::from_counts(&self.station_id, c),
            None => {
                let c: Vec<i64> = self.labels.iter().map(|&l| i64::from(l)).collect();
                StationStats::from_counts(&self.station_id, &c)
            }
        }
    }
}
