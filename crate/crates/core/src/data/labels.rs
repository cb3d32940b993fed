use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Stations whose share of multi-event hours reaches this value are dropped.
pub const DEFAULT_MULTI_EVENT_THRESHOLD: f64 = 0.03;

/// Collapses per-hour event counts to occurrence labels.
pub fn binarize_labels(counts: &[i64]) -> Result<Vec<u8>> {
    counts
        .iter()
        .map(|&c| match c {
            c if c < 0 => Err(Error::Domain(format!("negative event count {c}"))),
            0 => Ok(0),
            _ => Ok(1),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationStats {
    pub station_id: String,
    pub total_events: u64,
    pub pct_zero_hours: f64,
    pub pct_multi_hours: f64,
}

impl StationStats {
    pub fn from_counts(station_id: &str, counts: &[i64]) -> Result<Self> {
        let mut total = 0u64;
        let (mut zero, mut multi) = (0usize, 0usize);
        for &c in counts {
            if c < 0 {
                return Err(Error::Domain(format!("negative event count {c}")));
            }
            total += c as u64;
            match c {
                0 => zero += 1,
                1 => {}
                _ => multi += 1,
            }
        }
        let n = counts.len().max(1) as f64;
        Ok(StationStats {
            station_id: station_id.to_string(),
            total_events: total,
            pct_zero_hours: zero as f64 / n,
            pct_multi_hours: multi as f64 / n,
        })
    }

    pub fn pct_single_hours(&self) -> f64 {
        1.0 - self.pct_zero_hours - self.pct_multi_hours
    }
}

/// Keeps stations whose multi-event share is strictly below `threshold`.
/// The result is sorted, so it does not depend on input order.
pub fn filter_stations(stats: &[StationStats], threshold: f64) -> Result<Vec<String>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Parameter(format!(
            "station filter threshold {threshold} outside (0, 1)"
        )));
    }
    let mut kept: Vec<String> = stats
        .iter()
        .filter(|s| s.pct_multi_hours < threshold)
        .map(|s| s.station_id.clone())
        .collect();
    kept.sort();
    kept.dedup();
    Ok(kept)
}
