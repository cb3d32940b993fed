use chrono::{Datelike, NaiveDateTime, Timelike};

/// Names of the calendar columns appended by
/// [`FeatureTable::with_time_features`](super::FeatureTable::with_time_features).
pub const TIME_FEATURES: [&str; 3] = ["hour", "weekday", "month"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEncoding {
    pub hour: f64,
    pub weekday: f64,
    pub month: f64,
}

/// Maps hour (0..=23), weekday (Monday = 0) and month (January = 0) onto
/// `[0, 1]`.
pub fn encode_time(ts: NaiveDateTime) -> TimeEncoding {
    TimeEncoding {
        hour: f64::from(ts.hour()) / 23.0,
        weekday: f64::from(ts.weekday().num_days_from_monday()) / 6.0,
        month: f64::from(ts.month0()) / 11.0,
    }
}

/// Recovers the hour of day from a normalized hour value.
pub fn hour_index(hour_norm: f64) -> usize {
    ((hour_norm * 23.0).round().max(0.0) as usize).min(23)
}
