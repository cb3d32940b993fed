use serde::{Deserialize, Serialize};

use crate::data::hour_index;
use crate::{Error, Result};

pub(crate) const HOUR_FEATURE: &str = "hour";

/// Empirical event rate per hour of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    /// `None` for hours absent from the training data.
    pub rates: Vec<Option<f64>>,
    pub global_rate: f64,
}

impl PriorModel {
    pub fn rate(&self, hour: usize) -> f64 {
        self.rates[hour].unwrap_or(self.global_rate)
    }

    /// Expects the normalized `hour` value as the only feature.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.rate(hour_index(row[0]))
    }

    /// Hard decision: class 1 when the hour's rate reaches `c`.
    pub fn classify(&self, hour: usize, c: f64) -> bool {
        self.rate(hour) >= c
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let in_unit = |r: f64| (0.0..=1.0).contains(&r);
        if self.rates.len() != 24 || !in_unit(self.global_rate) || self.rates.iter().flatten().any(|&r| !in_unit(r)) {
            return Err(Error::Schema("prior needs 24 hourly rates within [0, 1]".into()));
        }
        Ok(())
    }
}

/// `hours` holds hour-of-day indices (0..=23), one per row.
pub fn fit_prior(hours: &[usize], labels: &[u8]) -> Result<PriorModel> {
    if hours.len() != labels.len() {
        return Err(Error::Schema("hours and labels differ in length".into()));
    }
    if hours.is_empty() {
        return Err(Error::Degenerate("cannot fit a prior on zero rows".into()));
    }
    let mut pos = [0usize; 24];
    let mut tot = [0usize; 24];
    for (&h, &y) in hours.iter().zip(labels) {
        if h > 23 {
            return Err(Error::Domain(format!("hour {h} out of range")));
        }
        tot[h] += 1;
        pos[h] += usize::from(y == 1);
    }
    let global_rate = pos.iter().sum::<usize>() as f64 / hours.len() as f64;
    let rates = (0..24)
        .map(|h| (tot[h] > 0).then(|| pos[h] as f64 / tot[h] as f64))
        .collect();
    Ok(PriorModel { rates, global_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_rate_per_hour() {
        let mut hours = vec![8; 100];
        let mut labels: Vec<u8> = (0..100).map(|i| u8::from(i < 30)).collect();
        hours.extend([3, 3]);
        labels.extend([0, 1]);
        let p = fit_prior(&hours, &labels).unwrap();
        assert_eq!(p.rate(8), 0.30);
        assert_eq!(p.rate(3), 0.5);
        assert_eq!(p.predict_row(&[8.0 / 23.0]), 0.30);
        assert!(p.classify(8, 0.3) && !p.classify(8, 0.31));
    }

    #[test]
    fn unseen_hours_take_global_rate() {
        let p = fit_prior(&[0, 0, 1, 1], &[1, 0, 1, 1]).unwrap();
        assert_eq!(p.rate(17), 0.75);
        assert_eq!(p.rates[17], None);
    }

    #[test]
    fn all_negative_labels() {
        let p = fit_prior(&[0, 5, 9], &[0, 0, 0]).unwrap();
        assert!((0..24).all(|h| p.rate(h) == 0.0));
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_prior(&[24], &[0]).is_err());
        assert!(fit_prior(&[1], &[0, 1]).is_err());
        assert!(fit_prior(&[], &[]).is_err());
    }
}
