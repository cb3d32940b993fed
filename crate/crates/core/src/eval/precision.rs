use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// γ used when none is configured: at least 1% of rows must be predicted zero.
pub const DEFAULT_GAMMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPoint {
    /// Threshold: rows with `P(class 0) >= c` are predicted zero.
    pub c: f64,
    /// Share of true zeros among predicted zeros.
    pub precision: f64,
    pub n_predicted_zero: usize,
    pub frac_predicted_zero: f64,
}

/// Class-zero precision as a function of the confidence threshold.
///
/// Thresholds that predict no zero are omitted, except `c = 1`, whose
/// precision is then defined as 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    /// Ascending in `c`.
    pub points: Vec<PrecisionPoint>,
    pub n: usize,
}

impl PrecisionCurve {
    pub fn at(&self, c: f64) -> Option<&PrecisionPoint> {
        self.points.iter().find(|p| p.c == c)
    }
}

/// Precision of the "no event" prediction over a grid of thresholds.
///
/// `prob_zero` is each row's probability of class 0. Without an explicit
/// grid the thresholds are the distinct probabilities plus 0 and 1.
pub fn precision_curve(prob_zero: &[f64], labels: &[u8], grid: Option<&[f64]>) -> Result<PrecisionCurve> {
    if prob_zero.len() != labels.len() {
        return Err(Error::Parameter("probabilities and labels differ in length".into()));
    }
    if let Some(p) = prob_zero.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    if let Some(l) = labels.iter().find(|l| **l > 1) {
        return Err(Error::Domain(format!("label {l} is not binary")));
    }
    let mut thresholds: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => prob_zero.iter().copied().chain([0.0, 1.0]).collect(),
    };
    if let Some(c) = thresholds.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::Parameter(format!("threshold {c} outside [0, 1]")));
    }
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    // Rows sorted by descending probability; a suffix sweep counts the rows
    // at or above each threshold.
    let mut order: Vec<usize> = (0..prob_zero.len()).collect();
    order.sort_by(|&a, &b| prob_zero[b].total_cmp(&prob_zero[a]));
    let n = prob_zero.len();
    let mut points = Vec::with_capacity(thresholds.len());
    let (mut k, mut true_zero) = (0usize, 0usize);
    for &c in thresholds.iter().rev() {
        while k < n && prob_zero[order[k]] >= c {
            if labels[order[k]] == 0 {
                true_zero += 1;
            }
            k += 1;
        }
        let frac = if n == 0 { 0.0 } else { k as f64 / n as f64 };
        if k > 0 {
            points.push(PrecisionPoint {
                c,
                precision: true_zero as f64 / k as f64,
                n_predicted_zero: k,
                frac_predicted_zero: frac,
            });
        } else if c == 1.0 {
            points.push(PrecisionPoint {
                c,
                precision: 1.0,
                n_predicted_zero: 0,
                frac_predicted_zero: 0.0,
            });
        }
    }
    points.reverse();
    Ok(PrecisionCurve { points, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum GammaPrecision {
    Feasible {
        p_star: f64,
        c: f64,
    },
    /// No threshold predicts more than `n·γ` zeros.
    Infeasible,
}

impl GammaPrecision {
    pub fn p_star(&self) -> Option<f64> {
        match self {
            GammaPrecision::Feasible { p_star, .. } => Some(*p_star),
            GammaPrecision::Infeasible => None,
        }
    }
}

/// Best precision among thresholds predicting strictly more than `n·γ`
/// zeros. Ties go to the largest such threshold.
pub fn gamma_precision(curve: &PrecisionCurve, gamma: f64) -> Result<GammaPrecision> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Parameter(format!("gamma {gamma} outside [0, 1)")));
    }
    let floor = curve.n as f64 * gamma;
    let mut best: Option<&PrecisionPoint> = None;
    for p in curve.points.iter().filter(|p| p.n_predicted_zero as f64 > floor) {
        if best.is_none_or(|b| p.precision >= b.precision) {
            best = Some(p);
        }
    }
    Ok(match best {
        Some(p) => GammaPrecision::Feasible {
            p_star: p.precision,
            c: p.c,
        },
        None => GammaPrecision::Infeasible,
    })
}
