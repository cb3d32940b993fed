use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_CORR_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum TrafficMethod {
    /// The target had no gaps.
    Unchanged,
    /// Gaps filled with `slope * candidate + intercept`.
    Rescaled {
        candidate: usize,
        correlation: f64,
        slope: f64,
        intercept: f64,
    },
    /// Gaps filled with the mean of the target's (weekday, hour) cell.
    SeasonalMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficFill {
    pub values: Vec<f64>,
    pub method: TrafficMethod,
    /// Gap hours filled by the seasonal mean, including hours where the
    /// chosen candidate was itself missing.
    pub seasonal_hours: usize,
}

fn joint_moments(a: &[Option<f64>], b: &[Option<f64>]) -> Option<(f64, f64, f64, f64, f64)> {
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    Some((ma, mb, saa, sbb, sab))
}

/// Fills gaps in a road-traffic series.
///
/// The candidate road with the highest Pearson correlation to the target
/// (on jointly observed hours) is used when that correlation exceeds
/// `threshold`: gaps take the candidate's value mapped through the
/// least-squares line `target ≈ slope * candidate + intercept`. Otherwise,
/// or where the candidate is itself missing, gaps take the mean of the
/// target over the same (weekday, hour) cell, or the global mean when that
/// cell was never observed.
pub fn impute_traffic(
    target: &[Option<f64>],
    timestamps: &[NaiveDateTime],
    candidates: &[Vec<Option<f64>>],
    threshold: f64,
) -> Result<TrafficFill> {
    if target.len() != timestamps.len() {
        return Err(Error::Parameter("target and timestamps differ in length".into()));
    }
    if candidates.iter().any(|c| c.len() != target.len()) {
        return Err(Error::Parameter("candidate series differ in length from target".into()));
    }
    let observed: Vec<f64> = target.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Err(Error::Degenerate("traffic target has no observed values".into()));
    }
    if observed.len() == target.len() {
        return Ok(TrafficFill {
            values: observed,
            method: TrafficMethod::Unchanged,
            seasonal_hours: 0,
        });
    }

    let mut best: Option<(usize, f64, f64, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let Some((mt, mc, stt, scc, stc)) = joint_moments(target, cand) else {
            continue;
        };
        if stt <= 0.0 || scc <= 0.0 {
            continue;
        }
        let r = stc / (stt.sqrt() * scc.sqrt());
        if r > threshold && best.is_none_or(|b| r > b.1) {
            let slope = stc / scc;
            best = Some((i, r, slope, mt - slope * mc));
        }
    }

    let global = observed.iter().sum::<f64>() / observed.len() as f64;
    let mut cell_sum = [[0.0f64; 24]; 7];
    let mut cell_n = [[0usize; 24]; 7];
    for (v, t) in target.iter().zip(timestamps) {
        if let Some(v) = v {
            let (d, h) = (t.weekday().num_days_from_monday() as usize, t.hour() as usize);
            cell_sum[d][h] += v;
            cell_n[d][h] += 1;
        }
    }
    let seasonal = |t: &NaiveDateTime| {
        let (d, h) = (t.weekday().num_days_from_monday() as usize, t.hour() as usize);
        if cell_n[d][h] > 0 {
            cell_sum[d][h] / cell_n[d][h] as f64
        } else {
            global
        }
    };

    let mut seasonal_hours = 0;
    let values = target
        .iter()
        .zip(timestamps)
        .enumerate()
        .map(|(i, (v, t))| {
            if let Some(v) = v {
                return *v;
            }
            if let Some((c, _, slope, intercept)) = best {
                if let Some(x) = candidates[c][i] {
                    return slope * x + intercept;
                }
            }
            seasonal_hours += 1;
            seasonal(t)
        })
        .collect();
    let method = match best {
        Some((candidate, correlation, slope, intercept)) => TrafficMethod::Rescaled {
            candidate,
            correlation,
            slope,
            intercept,
        },
        None => TrafficMethod::SeasonalMean,
    };
    Ok(TrafficFill {
        values,
        method,
        seasonal_hours,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};
    use proptest::prelude::*;

    fn hours(n: usize) -> Vec<NaiveDateTime> {
        // 2024-01-01 is a Monday.
        let t0 = NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        (0..n).map(|i| t0 + Duration::hours(i as i64)).collect()
    }

    #[test]
    fn exact_multiple_candidate_is_rescaled() {
        let truth: Vec<f64> = (0..48).map(|i| 100.0 + 30.0 * ((i as f64) * 0.3).sin()).collect();
        let cand: Vec<Option<f64>> = truth.iter().map(|v| Some(2.0 * v)).collect();
        let mut target: Vec<Option<f64>> = truth.iter().copied().map(Some).collect();
        target[10] = None;
        let fill = impute_traffic(&target, &hours(48), std::slice::from_ref(&cand), 0.95).unwrap();
        assert!(matches!(fill.method, TrafficMethod::Rescaled { candidate: 0, .. }));
        assert!((fill.values[10] - cand[10].unwrap() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn weak_candidates_fall_back_to_seasonal_cell() {
        // Two weeks; Tuesday 08:00 observed once per week at 100 and 120, gap in week 3.
        let n = 24 * 7 * 3;
        let ts = hours(n);
        let mut target: Vec<Option<f64>> = (0..n).map(|i| Some(50.0 + (i % 5) as f64)).collect();
        let tue8 = [24 + 8, 24 * 8 + 8, 24 * 15 + 8];
        target[tue8[0]] = Some(100.0);
        target[tue8[1]] = Some(120.0);
        target[tue8[2]] = None;
        let noise: Vec<Option<f64>> = (0..n).map(|i| Some(((i * 7919) % 13) as f64)).collect();
        let fill = impute_traffic(&target, &ts, &[noise], 0.95).unwrap();
        assert_eq!(fill.method, TrafficMethod::SeasonalMean);
        assert!((fill.values[tue8[2]] - 110.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_below_threshold_is_ignored() {
        // Correlation 0.9 exactly by construction is irrelevant; use a mildly correlated series.
        let n = 24 * 7;
        let target: Vec<Option<f64>> = (0..n)
            .map(|i| if i == 5 { None } else { Some((i as f64).sin()) })
            .collect();
        let cand: Vec<Option<f64>> = (0..n)
            .map(|i| Some((i as f64).sin() + 0.5 * (i as f64 * 1.7).cos()))
            .collect();
        let fill = impute_traffic(&target, &hours(n), &[cand], 0.95).unwrap();
        assert_eq!(fill.method, TrafficMethod::SeasonalMean);
    }

    #[test]
    fn empty_target_errors() {
        assert!(impute_traffic(&[None, None], &hours(2), &[], 0.95).is_err());
        assert!(impute_traffic(&[], &[], &[], 0.95).is_err());
    }

    proptest! {
        #[test]
        fn gap_free_target_is_unchanged(vals in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let target: Vec<Option<f64>> = vals.iter().copied().map(Some).collect();
            let fill = impute_traffic(&target, &hours(vals.len()), &[], 0.95).unwrap();
            prop_assert_eq!(fill.values, vals);
            prop_assert_eq!(fill.method, TrafficMethod::Unchanged);
        }
    }
}
