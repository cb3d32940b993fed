use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Parameter("scores and labels differ in length".into()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Domain(format!("score {s} is not a number")));
    }
    let mut pos = 0;
    for &y in labels {
        match y {
            0 => {}
            1 => pos += 1,
            other => return Err(Error::Domain(format!("label {other} is not binary"))),
        }
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("AUC needs both label classes".into()));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Area under the ROC curve as the Mann–Whitney pair statistic: the share
/// of (positive, negative) pairs ranked correctly, ties counted as half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let idx = descending(scores);
    // Walk tie groups from the top; every positive beats the negatives not
    // yet seen and ties with the negatives in its own group.
    let mut neg_above = 0u64;
    let mut credit2 = 0u128;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        let below = n_neg as u64 - neg_above - q;
        credit2 += u128::from(p) * (2 * u128::from(below) + u128::from(q));
        neg_above += q;
        i = j;
    }
    Ok(credit2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC polyline from `(0, 0)` to `(1, 1)`, one vertex per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let idx = descending(scores);
    let mut out = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        out.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
        i = j;
    }
    Ok(out)
}
