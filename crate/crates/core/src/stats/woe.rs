//! Weight-of-Evidence binning and Information Value.

use serde::{Deserialize, Serialize};

use crate::data::FeatureKind;
use crate::{Error, Result};

/// Bin count for continuous features.
pub const DEFAULT_CONTINUOUS_BINS: usize = 24;

/// Pseudo-count added to each class-conditional bin count.
const SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvBand {
    Insignificant,
    Weak,
    Medium,
    Strong,
}

impl IvBand {
    pub fn from_iv(iv: f64) -> Self {
        if iv < 0.02 {
            IvBand::Insignificant
        } else if iv < 0.1 {
            IvBand::Weak
        } else if iv <= 0.3 {
            IvBand::Medium
        } else {
            IvBand::Strong
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IvBand::Insignificant => "insignificant",
            IvBand::Weak => "weak",
            IvBand::Medium => "medium",
            IvBand::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoeBin {
    pub index: usize,
    /// Value range covered, `[lower, upper)` (closed at 1 for the last bin).
    pub lower: f64,
    pub upper: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Smoothed `P[X = bin | Y = 1]`.
    pub p_pos: f64,
    /// Smoothed `P[X = bin | Y = 0]`.
    pub p_neg: f64,
    pub woe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvResult {
    pub feature: String,
    pub iv: f64,
    pub band: IvBand,
    pub bins: Vec<WoeBin>,
}

fn bin_of(x: f64, m: usize, kind: FeatureKind) -> usize {
    match kind {
        FeatureKind::Continuous => ((x.clamp(0.0, 1.0) * m as f64).floor() as usize).min(m - 1),
        FeatureKind::Categorical { .. } => kind.class_of(x).expect("categorical"),
    }
}

/// Per-bin Weight-of-Evidence `ln(P[X=i|Y=1] / P[X=i|Y=0])`.
///
/// Continuous features (expected in `[0, 1]`) are cut into `m` equal-width
/// bins; categorical features get one bin per class and ignore `m`. Each
/// class-conditional count gets +0.5 before normalizing; bins without rows
/// are dropped.
pub fn woe_bins(values: &[f64], labels: &[u8], m: usize, kind: FeatureKind) -> Result<Vec<WoeBin>> {
    if values.len() != labels.len() {
        return Err(Error::Parameter("values and labels differ in length".into()));
    }
    let n_bins = match kind {
        FeatureKind::Continuous => m,
        FeatureKind::Categorical { classes } => classes,
    };
    if n_bins == 0 {
        return Err(Error::Parameter("WoE needs at least one bin".into()));
    }
    let mut pos = vec![0usize; n_bins];
    let mut neg = vec![0usize; n_bins];
    for (&x, &y) in values.iter().zip(labels) {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite feature value {x}")));
        }
        let b = bin_of(x, n_bins, kind);
        match y {
            0 => neg[b] += 1,
            1 => pos[b] += 1,
            other => return Err(Error::Domain(format!("label {other} is not binary"))),
        }
    }
    let (tp, tn) = (pos.iter().sum::<usize>(), neg.iter().sum::<usize>());
    if tp == 0 || tn == 0 {
        return Err(Error::Degenerate("WoE needs both label classes".into()));
    }
    let kept: Vec<usize> = (0..n_bins).filter(|&b| pos[b] + neg[b] > 0).collect();
    let sp: f64 = kept.iter().map(|&b| pos[b] as f64 + SMOOTHING).sum();
    let sn: f64 = kept.iter().map(|&b| neg[b] as f64 + SMOOTHING).sum();
    Ok(kept
        .into_iter()
        .map(|b| {
            let p_pos = (pos[b] as f64 + SMOOTHING) / sp;
            let p_neg = (neg[b] as f64 + SMOOTHING) / sn;
            let (lower, upper) = match kind {
                FeatureKind::Continuous => (b as f64 / n_bins as f64, (b + 1) as f64 / n_bins as f64),
                FeatureKind::Categorical { classes } => {
                    let v = b as f64 / (classes - 1) as f64;
                    (v, v)
                }
            };
            WoeBin {
                index: b,
                lower,
                upper,
                n_pos: pos[b],
                n_neg: neg[b],
                p_pos,
                p_neg,
                woe: (p_pos / p_neg).ln(),
            }
        })
        .collect())
}

/// Information Value `Σ (P[X=i|Y=1] - P[X=i|Y=0]) · WoE_i` over the
/// retained bins, with its rule-of-thumb strength band.
pub fn information_value(
    feature: &str,
    values: &[f64],
    labels: &[u8],
    m: usize,
    kind: FeatureKind,
) -> Result<IvResult> {
    let bins = woe_bins(values, labels, m, kind)?;
    let iv = bins.iter().map(|b| (b.p_pos - b.p_neg) * b.woe).sum::<f64>().max(0.0);
    Ok(IvResult {
        feature: feature.to_string(),
        iv,
        band: IvBand::from_iv(iv),
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CONT: FeatureKind = FeatureKind::Continuous;

    #[test]
    fn equal_proportions_give_zero_woe() {
        let v = [0.1, 0.1, 0.9, 0.9];
        let y = [0, 1, 0, 1];
        let bins = woe_bins(&v, &y, 2, CONT).unwrap();
        assert!(bins.iter().all(|b| b.woe.abs() < 1e-15));
        let iv = information_value("x", &v, &y, 2, CONT).unwrap();
        assert_eq!(iv.iv, 0.0);
        assert_eq!(iv.band, IvBand::Insignificant);
    }

    #[test]
    fn smoothed_pure_bin() {
        // Bin 0: 9 positives, 0 negatives; bin 1: 0 positives, 9 negatives.
        // Smoothed counts (9.5, 0.5) and (0.5, 9.5) out of totals (10, 10).
        let mut v = vec![0.2; 9];
        v.extend(vec![0.8; 9]);
        let mut y = vec![1u8; 9];
        y.extend(vec![0u8; 9]);
        let bins = woe_bins(&v, &y, 2, CONT).unwrap();
        let want = (0.95f64 / 0.05).ln();
        assert!((bins[0].woe - want).abs() < 1e-12);
        assert!((bins[0].woe - 2.944_438_979_166_44).abs() < 1e-12);
        assert!((bins[1].woe + want).abs() < 1e-12);
    }

    #[test]
    fn constant_feature() {
        let r = information_value("c", &[0.4; 6], &[0, 1, 0, 1, 1, 0], 24, CONT).unwrap();
        assert_eq!(r.bins.len(), 1);
        assert_eq!(r.bins[0].woe, 0.0);
        assert_eq!(r.iv, 0.0);
    }

    #[test]
    fn single_class_errors() {
        assert!(matches!(
            woe_bins(&[0.1, 0.2], &[1, 1], 4, CONT),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn categorical_uses_classes() {
        let k = FeatureKind::Categorical { classes: 3 };
        let v = [0.0, 0.5, 1.0, 0.5];
        let bins = woe_bins(&v, &[0, 1, 0, 1], 24, k).unwrap();
        assert_eq!(bins.iter().map(|b| b.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn bands() {
        assert_eq!(IvBand::from_iv(0.25), IvBand::Medium);
        assert_eq!(IvBand::from_iv(0.3), IvBand::Medium);
        assert_eq!(IvBand::from_iv(0.1), IvBand::Medium);
        assert_eq!(IvBand::from_iv(0.0999), IvBand::Weak);
        assert_eq!(IvBand::from_iv(0.019), IvBand::Insignificant);
        assert_eq!(IvBand::from_iv(0.31), IvBand::Strong);
    }

    proptest! {
        #[test]
        fn iv_nonnegative_and_flip_symmetric(
            rows in prop::collection::vec((0.0f64..=1.0, 0u8..2), 2..200),
        ) {
            let v: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let y: Vec<u8> = rows.iter().map(|r| r.1).collect();
            let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
            if let (Ok(a), Ok(b)) = (information_value("x", &v, &y, 8, CONT), information_value("x", &v, &flipped, 8, CONT)) {
                prop_assert!(a.iv >= 0.0);
                prop_assert!((a.iv - b.iv).abs() < 1e-12);
                for (p, q) in a.bins.iter().zip(&b.bins) {
                    prop_assert!((p.woe + q.woe).abs() < 1e-12);
                }
            }
        }
    }
}
