use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::roc_auc;
use crate::models::{Dataset, Predictor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermLoss {
    #[default]
    OneMinusAuc,
    LogLoss,
}

impl PermLoss {
    fn eval(self, scores: &[f64], labels: &[u8]) -> Result<f64> {
        match self {
            PermLoss::OneMinusAuc => Ok(1.0 - roc_auc(scores, labels)?),
            PermLoss::LogLoss => {
                let eps = 1e-15;
                let total: f64 = scores
                    .iter()
                    .zip(labels)
                    .map(|(&p, &y)| {
                        let p = p.clamp(eps, 1.0 - eps);
                        if y == 1 {
                            -p.ln()
                        } else {
                            -(1.0 - p).ln()
                        }
                    })
                    .sum();
                Ok(total / scores.len() as f64)
            }
        }
    }
}

/// How a column is destroyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Seeded shuffle of the column; keeps its marginal distribution.
    #[default]
    Permute,
    /// Uniform draws over the column's observed range.
    UniformNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermConfig {
    pub loss: PermLoss,
    pub repeats: usize,
    pub seed: u64,
    pub perturbation: Perturbation,
}

impl Default for PermConfig {
    fn default() -> Self {
        PermConfig {
            loss: PermLoss::OneMinusAuc,
            repeats: 10,
            seed: 0,
            perturbation: Perturbation::Permute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermImportance {
    pub feature: String,
    /// Mean increase in loss over the repeats.
    pub mean: f64,
    /// Sample standard deviation of the increase (0 for a single repeat).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermResult {
    pub baseline_loss: f64,
    pub features: Vec<PermImportance>,
}

/// Loss increase when each feature column is perturbed, `repeats` times
/// per feature. Every feature draws from its own seeded stream, so the
/// result is independent of the thread count.
pub fn permutation_importance(model: &dyn Predictor, ds: &Dataset, cfg: &PermConfig) -> Result<PermResult> {
    if cfg.repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    let ds = ds.select(model.feature_names())?;
    let base_scores: Vec<f64> = ds.rows().map(|r| model.predict_row(r)).collect();
    if cfg.loss == PermLoss::OneMinusAuc && base_scores.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Degenerate(
            "model scores are constant; AUC-based importance is undefined".into(),
        ));
    }
    let e0 = cfg.loss.eval(&base_scores, ds.labels())?;
    let features = (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(j as u64);
            let original = ds.column(j);
            let (lo, hi) = original
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let mut deltas = Vec::with_capacity(cfg.repeats);
            let mut col = original.clone();
            for _ in 0..cfg.repeats {
                match cfg.perturbation {
                    Perturbation::Permute => {
                        col.copy_from_slice(&original);
                        col.shuffle(&mut rng);
                    }
                    Perturbation::UniformNoise => {
                        col.iter_mut().for_each(|v| *v = lo + (hi - lo) * rng.random::<f64>());
                    }
                }
                let perturbed = ds.with_column(j, &col);
                let scores: Vec<f64> = perturbed.rows().map(|r| model.predict_row(r)).collect();
                deltas.push(cfg.loss.eval(&scores, ds.labels())? - e0);
            }
            let n = deltas.len() as f64;
            let mean = deltas.iter().sum::<f64>() / n;
            let std = if deltas.len() > 1 {
                (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok(PermImportance {
                feature: ds.names()[j].clone(),
                mean,
                std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PermResult {
        baseline_loss: e0,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnModel;

    fn data(n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.3 * rng.random::<f64>() > 0.6))
            .collect();
        Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap()
    }

    fn only_a() -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
        FnModel::new(vec!["a".into(), "b".into()], |r: &[f64]| r[0])
    }

    #[test]
    fn unused_feature_has_zero_importance() {
        let r = permutation_importance(&only_a(), &data(500), &PermConfig::default()).unwrap();
        assert_eq!(r.features[1].mean, 0.0);
        assert!(r.features[0].mean > 0.2);
    }

    #[test]
    fn single_informative_column_drops_to_chance() {
        let ds = data(2000);
        let m = only_a();
        let auc = roc_auc(&m.predict(&ds).unwrap(), ds.labels()).unwrap();
        let cfg = PermConfig {
            repeats: 50,
            ..PermConfig::default()
        };
        let r = permutation_importance(&m, &ds, &cfg).unwrap();
        assert!((r.features[0].mean - (auc - 0.5)).abs() <= 0.02);
    }

    #[test]
    fn seeds_control_draws() {
        let ds = data(300);
        let cfg = |seed| PermConfig {
            repeats: 1,
            seed,
            ..PermConfig::default()
        };
        let a = permutation_importance(&only_a(), &ds, &cfg(1)).unwrap();
        let b = permutation_importance(&only_a(), &ds, &cfg(1)).unwrap();
        let c = permutation_importance(&only_a(), &ds, &cfg(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.features[0].mean, c.features[0].mean);
        assert_eq!(a.features[0].std, 0.0);
    }

    #[test]
    fn constant_model() {
        let ds = data(100);
        let m = FnModel::new(vec!["a".into(), "b".into()], |_: &[f64]| 0.3);
        assert!(matches!(
            permutation_importance(&m, &ds, &PermConfig::default()),
            Err(Error::Degenerate(_))
        ));
        let cfg = PermConfig {
            loss: PermLoss::LogLoss,
            perturbation: Perturbation::UniformNoise,
            ..PermConfig::default()
        };
        let r = permutation_importance(&m, &ds, &cfg).unwrap();
        assert!(r.features.iter().all(|f| f.mean == 0.0 && f.std == 0.0));
    }
}
