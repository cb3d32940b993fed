use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sign convention of the distance exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdwExponent {
    /// `w ∝ d^-s`: larger `s` concentrates weight on the nearest sensors.
    #[default]
    Inverse,
    /// `w ∝ d^s`, the formula taken literally; kept for comparison runs.
    Literal,
}

/// Normalized distance weights for a set of sensors around one station.
///
/// With [`IdwExponent::Inverse`] a colocated sensor (`d = 0`) takes all the
/// weight, shared equally if several are colocated.
pub fn idw_weights(distances: &[f64], s: f64, exponent: IdwExponent) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("IDW exponent must be positive, got {s}")));
    }
    if distances.is_empty() {
        return Err(Error::Parameter("IDW needs at least one sensor".into()));
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::Parameter(format!("invalid distance {d}")));
    }
    let raw: Vec<f64> = match exponent {
        IdwExponent::Inverse => {
            let zeros = distances.iter().filter(|&&d| d == 0.0).count();
            if zeros > 0 {
                distances.iter().map(|&d| if d == 0.0 { 1.0 } else { 0.0 }).collect()
            } else {
                // (d_min / d)^s is d^-s up to a common factor and cannot overflow.
                let dmin = distances.iter().copied().fold(f64::INFINITY, f64::min);
                distances.iter().map(|&d| (dmin / d).powf(s)).collect()
            }
        }
        IdwExponent::Literal => {
            let dmax = distances.iter().copied().fold(0.0, f64::max);
            if dmax == 0.0 {
                vec![1.0; distances.len()]
            } else {
                distances.iter().map(|&d| (d / dmax).powf(s)).collect()
            }
        }
    };
    let total: f64 = raw.iter().sum();
    Ok(raw.iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSeries {
    pub values: Vec<Option<f64>>,
    /// Hours where no sensor reported.
    pub missing_hours: usize,
}

/// Weighted average across sensors, hour by hour, renormalizing the weights
/// over the sensors that reported at that hour.
pub fn impute_weighted(series: &[Vec<Option<f64>>], weights: &[f64]) -> Result<WeightedSeries> {
    if series.len() != weights.len() {
        return Err(Error::Parameter(format!(
            "{} series but {} weights",
            series.len(),
            weights.len()
        )));
    }
    let len = series.first().map_or(0, Vec::len);
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::Parameter("sensor series differ in length".into()));
    }
    let mut missing_hours = 0;
    let values = (0..len)
        .map(|t| {
            let (mut num, mut den) = (0.0, 0.0);
            for (s, &w) in series.iter().zip(weights) {
                if let Some(x) = s[t] {
                    num += w * x;
                    den += w;
                }
            }
            if den > 0.0 {
                Some(num / den)
            } else {
                // Only zero-weight sensors reported: use their plain mean.
                let reporters: Vec<f64> = series.iter().filter_map(|s| s[t]).collect();
                if reporters.is_empty() {
                    missing_hours += 1;
                    None
                } else {
                    Some(reporters.iter().sum::<f64>() / reporters.len() as f64)
                }
            }
        })
        .collect();
    Ok(WeightedSeries { values, missing_hours })
}
