//! Fully connected network with ReLU hidden layers and a sigmoid output,
//! trained with Adam on binary cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Dataset, MlpParams};
use crate::eval::roc_auc;
use crate::{Error, Result};

/// One affine layer; `weights` is `n_out x n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
}

impl MlpModel {
    pub fn logit(&self, row: &[f64]) -> f64 {
        let mut cur = row.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.logit(row))
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        let mut n_in = n_features;
        for (i, l) in self.layers.iter().enumerate() {
            let ok = l.n_in == n_in
                && l.n_out > 0
                && l.weights.len() == l.n_in * l.n_out
                && l.bias.len() == l.n_out
                && l.weights.iter().chain(&l.bias).all(|v| v.is_finite());
            if !ok {
                return Err(Error::Schema(format!("layer {i} has inconsistent shape or values")));
            }
            n_in = l.n_out;
        }
        if n_in != 1 || self.layers.is_empty() {
            return Err(Error::Schema("network must end in a single output unit".into()));
        }
        Ok(())
    }

    fn init(n_features: usize, hidden: &[usize], base_rate: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![n_features];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                // He initialization suits ReLU inputs.
                let normal = Normal::new(0.0, (2.0 / n_in.max(1) as f64).sqrt()).expect("valid std");
                Dense {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| normal.sample(rng)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect::<Vec<_>>();
        let mut m = MlpModel { layers };
        let out = m.layers.last_mut().expect("at least one layer");
        out.bias[0] = (base_rate / (1.0 - base_rate)).ln();
        m
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(sizes: &[usize], lr: f64) -> Self {
        Adam {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, p) in params.iter_mut().enumerate() {
            for i in 0..p.len() {
                let g = grads[k][i];
                let m = &mut self.m[k][i];
                let v = &mut self.v[k][i];
                *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                p[i] -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Scratch buffers for one forward/backward pass.
struct Workspace {
    /// Layer inputs: `acts[0]` is the row, `acts[l]` the (masked) output of layer `l - 1`.
    acts: Vec<Vec<f64>>,
    /// Combined ReLU-derivative and dropout scale per hidden unit.
    masks: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn new(n_layers: usize) -> Self {
        Workspace {
            acts: vec![Vec::new(); n_layers + 1],
            masks: vec![Vec::new(); n_layers],
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Adds the loss gradient of one sample to `grads` (weights and biases
    /// interleaved per layer) and returns the sample loss.
    fn accumulate(
        &mut self,
        model: &MlpModel,
        x: &[f64],
        y: f64,
        keep: f64,
        rng: &mut ChaCha8Rng,
        grads: &mut [Vec<f64>],
    ) -> f64 {
        let n_layers = model.layers.len();
        self.acts[0].clear();
        self.acts[0].extend_from_slice(x);
        for l in 0..n_layers {
            let (lo, hi) = self.acts.split_at_mut(l + 1);
            model.layers[l].forward(&lo[l], &mut hi[0]);
            if l + 1 < n_layers {
                let mask = &mut self.masks[l];
                mask.clear();
                for v in hi[0].iter_mut() {
                    let m = if keep < 1.0 && rng.random::<f64>() >= keep {
                        0.0
                    } else {
                        1.0 / keep
                    };
                    mask.push(if *v > 0.0 { m } else { 0.0 });
                    *v = v.max(0.0) * m;
                }
            }
        }
        let z = self.acts[n_layers][0];
        self.delta.clear();
        self.delta.push(sigmoid(z) - y);
        for l in (0..n_layers).rev() {
            let layer = &model.layers[l];
            let input = &self.acts[l];
            let (a, b) = grads.split_at_mut(2 * l + 1);
            let (gw, gb) = (&mut a[2 * l], &mut b[0]);
            for (o, d) in self.delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
            }
            if l > 0 {
                let mask = &self.masks[l - 1];
                let delta = &self.delta;
                self.delta_prev.clear();
                self.delta_prev.extend((0..layer.n_in).map(|k| {
                    let s: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(o, d)| d * layer.weights[o * layer.n_in + k])
                        .sum();
                    s * mask[k]
                }));
                std::mem::swap(&mut self.delta, &mut self.delta_prev);
            }
        }
        bce_with_logit(z, y)
    }
}

/// Mean loss and validation score (higher is better).
fn validation_score(model: &MlpModel, ds: &Dataset) -> (f64, f64) {
    let logits: Vec<f64> = ds.rows().map(|r| model.logit(r)).collect();
    let loss = logits
        .iter()
        .zip(ds.labels())
        .map(|(&z, &y)| bce_with_logit(z, f64::from(y)))
        .sum::<f64>()
        / ds.n_rows().max(1) as f64;
    let score = match roc_auc(&logits, ds.labels()) {
        Ok(auc) => auc,
        Err(_) => -loss,
    };
    (loss, score)
}

/// Trains with seeded shuffling and dropout. The last
/// `validation_fraction` of the rows (in row order) drive early stopping;
/// the weights from the best validation epoch are returned.
pub fn train_mlp(ds: &Dataset, hp: &MlpParams, seed: u64) -> Result<MlpModel> {
    hp.validate()?;
    ds.require_both_classes()?;
    let n = ds.n_rows();
    let n_val = (n as f64 * hp.validation_fraction).floor() as usize;
    let n_val = if n - n_val < 2 { 0 } else { n_val };
    let train = ds.slice(0, n - n_val);
    let val = ds.slice(n - n_val, n);
    let base_rate = (train.n_positive() as f64 / train.n_rows() as f64).clamp(1e-6, 1.0 - 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::init(ds.n_features(), &hp.hidden, base_rate, &mut rng);
    let n_layers = model.layers.len();
    let sizes: Vec<usize> = model
        .layers
        .iter()
        .flat_map(|l| [l.weights.len(), l.bias.len()])
        .collect();
    let mut adam = Adam::new(&sizes, hp.learning_rate);
    let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();

    let mut work = Workspace::new(n_layers);
    let keep = 1.0 - hp.dropout;

    let mut order: Vec<usize> = (0..train.n_rows()).collect();
    let mut best = (f64::NEG_INFINITY, model.clone());
    let mut since_best = 0;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hp.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            let mut batch_loss = 0.0;
            for &i in batch {
                let y = f64::from(train.labels()[i]);
                batch_loss += work.accumulate(&model, train.row(i), y, keep, &mut rng, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            let mut params: Vec<&mut [f64]> = model
                .layers
                .iter_mut()
                .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
                .collect();
            adam.step(&mut params, &grads);
        }

        if n_val == 0 {
            best.1 = model.clone();
            continue;
        }
        let (loss, score) = validation_score(&model, &val);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if score > best.0 {
            best = (score, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.patience {
                log::debug!("mlp early stop at epoch {epoch}");
                break;
            }
        }
    }
    if hp.epochs == 0 {
        return Ok(model);
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_2d(n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + r[1] > 1.0)).collect();
        Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap()
    }

    fn small() -> MlpParams {
        MlpParams {
            hidden: vec![8],
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 150,
            ..MlpParams::default()
        }
    }

    #[test]
    fn separable_validation_auc() {
        let ds = linear_2d(1000);
        let m = train_mlp(&ds, &small(), 1).unwrap();
        let val = ds.slice(800, 1000);
        let scores: Vec<f64> = val.rows().map(|r| m.predict_row(r)).collect();
        assert!(roc_auc(&scores, val.labels()).unwrap() >= 0.99);
    }

    #[test]
    fn zero_epochs_gives_initial_probabilities() {
        let ds = linear_2d(50);
        let m = train_mlp(&ds, &MlpParams { epochs: 0, ..small() }, 1).unwrap();
        assert!(ds.rows().all(|r| {
            let p = m.predict_row(r);
            p.is_finite() && p > 0.0 && p < 1.0
        }));
        m.validate(2).unwrap();
    }

    #[test]
    fn same_seed_same_weights() {
        let ds = linear_2d(200);
        let hp = MlpParams { epochs: 5, ..small() };
        assert_eq!(train_mlp(&ds, &hp, 4).unwrap(), train_mlp(&ds, &hp, 4).unwrap());
        assert_ne!(train_mlp(&ds, &hp, 4).unwrap(), train_mlp(&ds, &hp, 5).unwrap());
    }

    #[test]
    fn diverges_with_huge_learning_rate_or_succeeds_finitely() {
        let ds = linear_2d(200);
        let hp = MlpParams {
            learning_rate: 1e300,
            epochs: 3,
            ..small()
        };
        match train_mlp(&ds, &hp, 0) {
            Err(Error::Divergence { epoch }) => assert!(epoch >= 1),
            Ok(m) => assert!(m.validate(2).is_ok()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = MlpModel::init(3, &[4, 3], 0.3, &mut rng);
        let x = [0.2, -0.7, 1.1];
        let y = 1.0;
        let mut grads: Vec<Vec<f64>> = m
            .layers
            .iter()
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]])
            .collect();
        let mut work = Workspace::new(m.layers.len());
        work.accumulate(&m, &x, y, 1.0, &mut rng, &mut grads);
        let h = 1e-6;
        for l in 0..m.layers.len() {
            for (k, &analytic) in grads[2 * l].iter().enumerate() {
                let mut plus = m.clone();
                plus.layers[l].weights[k] += h;
                let mut minus = m.clone();
                minus.layers[l].weights[k] -= h;
                let numeric = (bce_with_logit(plus.logit(&x), y) - bce_with_logit(minus.logit(&x), y)) / (2.0 * h);
                assert!((numeric - analytic).abs() < 1e-6, "layer {l} weight {k}");
            }
        }
    }
}
