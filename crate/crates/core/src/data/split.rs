use chrono::{Datelike, NaiveDate, NaiveDateTime};

use super::FeatureTable;
use crate::{Error, Result};

/// Start of the calendar year containing the table's last timestamp.
pub fn default_eval_start(table: &FeatureTable) -> Result<NaiveDateTime> {
    let last = table
        .timestamps()
        .last()
        .ok_or_else(|| Error::Schema("cannot split an empty table".into()))?;
    Ok(NaiveDate::from_ymd_opt(last.year(), 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("January 1st exists"))
}

/// Splits into `(train, eval)`: rows strictly before `eval_start` train.
pub fn split_at(table: &FeatureTable, eval_start: NaiveDateTime) -> (FeatureTable, FeatureTable) {
    let cut = table.timestamps().partition_point(|t| *t < eval_start);
    (table.slice(0, cut), table.slice(cut, table.n_rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, FeatureKind};
    use chrono::Duration;

    #[test]
    fn last_calendar_year_is_eval() {
        let t0 = NaiveDate::from_ymd_opt(2019, 12, 31)
            .unwrap()
            .and_hms_opt(20, 0, 0)
            .unwrap();
        let ts: Vec<_> = (0..10).map(|i| t0 + Duration::hours(i)).collect();
        let col = Column::dense("x", FeatureKind::Continuous, (0..10).map(f64::from).collect());
        let t = FeatureTable::new("s", ts, vec![col], vec![0; 10]).unwrap();
        let start = default_eval_start(&t).unwrap();
        assert_eq!(start.year(), 2020);
        let (train, eval) = split_at(&t, start);
        assert_eq!((train.n_rows(), eval.n_rows()), (4, 6));
    }
}
