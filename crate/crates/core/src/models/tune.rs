use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, Dataset, Hyperparams, ModelKind, Predictor};
use crate::eval::roc_auc;
use crate::{Error, Result};

/// Ranges sampled by [`tune_random_search`]. Integer ranges are inclusive;
/// learning rates and the L2 penalty are drawn log-uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub gbdt_n_trees: (usize, usize),
    pub gbdt_max_depth: (usize, usize),
    pub gbdt_learning_rate: (f64, f64),
    pub gbdt_l2_lambda: (f64, f64),
    pub gbdt_min_child_weight: (f64, f64),
    pub mlp_learning_rate: (f64, f64),
    pub mlp_dropout: (f64, f64),
    pub mlp_hidden: Vec<Vec<usize>>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            gbdt_n_trees: (50, 300),
            gbdt_max_depth: (2, 6),
            gbdt_learning_rate: (0.01, 0.3),
            gbdt_l2_lambda: (0.1, 10.0),
            gbdt_min_child_weight: (1.0, 10.0),
            mlp_learning_rate: (1e-4, 1e-2),
            mlp_dropout: (0.0, 0.3),
            mlp_hidden: vec![vec![32, 16], vec![64, 32], vec![16]],
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let pos = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite();
        let ok = self.gbdt_n_trees.0 <= self.gbdt_n_trees.1
            && self.gbdt_max_depth.0 >= 1
            && self.gbdt_max_depth.0 <= self.gbdt_max_depth.1
            && pos(self.gbdt_learning_rate)
            && pos(self.gbdt_l2_lambda)
            && self.gbdt_min_child_weight.0 >= 0.0
            && self.gbdt_min_child_weight.0 <= self.gbdt_min_child_weight.1
            && pos(self.mlp_learning_rate)
            && self.mlp_dropout.0 >= 0.0
            && self.mlp_dropout.0 <= self.mlp_dropout.1
            && self.mlp_dropout.1 < 1.0
            && !self.mlp_hidden.is_empty();
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter("invalid search space".into()))
        }
    }

    fn sample(&self, kind: ModelKind, base: &Hyperparams, rng: &mut ChaCha8Rng) -> Hyperparams {
        let log_uniform =
            |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| (rng.random_range(0.0..=1.0) * (hi / lo).ln()).exp() * lo;
        let mut hp = base.clone();
        match kind {
            ModelKind::Gbdt => {
                let g = &mut hp.gbdt;
                g.n_trees = rng.random_range(self.gbdt_n_trees.0..=self.gbdt_n_trees.1);
                g.max_depth = rng.random_range(self.gbdt_max_depth.0..=self.gbdt_max_depth.1);
                g.learning_rate = log_uniform(rng, self.gbdt_learning_rate);
                g.l2_lambda = log_uniform(rng, self.gbdt_l2_lambda);
                g.min_child_weight = rng.random_range(self.gbdt_min_child_weight.0..=self.gbdt_min_child_weight.1);
            }
            ModelKind::Mlp => {
                let m = &mut hp.mlp;
                m.learning_rate = log_uniform(rng, self.mlp_learning_rate);
                m.dropout = rng.random_range(self.mlp_dropout.0..=self.mlp_dropout.1);
                m.hidden = self.mlp_hidden[rng.random_range(0..self.mlp_hidden.len())].clone();
            }
            ModelKind::Prior => {}
        }
        hp
    }
}

/// Mean validation AUC over contiguous time-block folds. Folds whose
/// training or validation part holds a single class are skipped.
fn cv_auc(kind: ModelKind, ds: &Dataset, hp: &Hyperparams, k_folds: usize, seed: u64) -> Result<f64> {
    let n = ds.n_rows();
    let mut total = 0.0;
    let mut used = 0;
    for k in 0..k_folds {
        let (lo, hi) = (k * n / k_folds, (k + 1) * n / k_folds);
        let val = ds.slice(lo, hi);
        let fit_rows: Vec<usize> = (0..lo).chain(hi..n).collect();
        let fit = ds.subset(&fit_rows);
        let single = |d: &Dataset| d.n_positive() == 0 || d.n_positive() == d.n_rows();
        if single(&val) || single(&fit) {
            log::debug!("fold {k} skipped: single class");
            continue;
        }
        let model = train(kind, &fit, hp, seed, None)?;
        total += roc_auc(&model.predict(&val)?, val.labels())?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "every cross-validation fold has a single class".into(),
        ));
    }
    Ok(total / used as f64)
}

/// Seeded random search over `space`, selecting by mean `k_folds`-fold AUC.
/// Ties keep the earlier configuration. With `budget == 0` the defaults are
/// returned untouched.
pub fn tune_random_search(
    ds: &Dataset,
    kind: ModelKind,
    defaults: &Hyperparams,
    space: &SearchSpace,
    k_folds: usize,
    budget: usize,
    seed: u64,
) -> Result<Hyperparams> {
    if k_folds < 2 {
        return Err(Error::Parameter(format!("k_folds must be at least 2, got {k_folds}")));
    }
    if budget == 0 || kind == ModelKind::Prior {
        return Ok(defaults.clone());
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Hyperparams)> = None;
    for trial in 0..budget {
        let hp = space.sample(kind, defaults, &mut rng);
        let score = match cv_auc(kind, ds, &hp, k_folds, seed) {
            Ok(s) => s,
            Err(Error::Divergence { epoch }) => {
                log::warn!("trial {trial} diverged at epoch {epoch}");
                continue;
            }
            Err(e) => return Err(e),
        };
        log::debug!("trial {trial}: mean auc {score:.4}");
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, hp));
        }
    }
    best.map(|(_, hp)| hp)
        .ok_or_else(|| Error::Degenerate("every search trial diverged".into()))
}
