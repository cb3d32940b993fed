use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{Dataset, Predictor};
use crate::{Error, Result};

/// Largest feature count accepted by exact enumeration (2^15 model calls per row).
pub const MAX_EXACT_FEATURES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ShapMode {
    Exact,
    /// Average marginal contributions over `samples` random feature orderings.
    Sampled {
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    pub mode: ShapMode,
    /// Value substituted for features outside a coalition, one per feature.
    pub background: Vec<f64>,
    pub seed: u64,
}

impl ShapConfig {
    pub fn exact(background: Vec<f64>) -> Self {
        ShapConfig {
            mode: ShapMode::Exact,
            background,
            seed: 0,
        }
    }

    pub fn sampled(background: Vec<f64>, samples: usize, seed: u64) -> Self {
        ShapConfig {
            mode: ShapMode::Sampled { samples },
            background,
            seed,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.background.len() != m {
            return Err(Error::Parameter(format!(
                "background has {} values for {m} features",
                self.background.len()
            )));
        }
        match self.mode {
            ShapMode::Exact if m > MAX_EXACT_FEATURES => Err(Error::Parameter(format!(
                "exact Shapley values over {m} features need 2^{m} evaluations per row; \
                 use sampled mode for more than {MAX_EXACT_FEATURES} features"
            ))),
            ShapMode::Sampled { samples } if samples < 64 => Err(Error::Parameter(format!(
                "sampled mode needs at least 64 samples, got {samples}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapValues {
    pub phi: Vec<f64>,
    /// Model output on the all-background row.
    pub base: f64,
    /// Standard error of each `phi` in sampled mode.
    pub std_err: Option<Vec<f64>>,
}

fn coalition_row(x: &[f64], background: &[f64], mask: usize, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = if mask >> i & 1 == 1 { x[i] } else { background[i] };
    }
}

fn exact(model: &dyn Predictor, x: &[f64], bg: &[f64]) -> ShapValues {
    let m = x.len();
    let mut row = vec![0.0; m];
    let values: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            coalition_row(x, bg, mask, &mut row);
            model.predict_row(&row)
        })
        .collect();
    // Shapley kernel weight |S|! (M - |S| - 1)! / M! by coalition size.
    let mut fact = vec![1.0f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..m).map(|s| fact[s] * fact[m - s - 1] / fact[m]).collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        *p = (0..1usize << m)
            .filter(|mask| mask & bit == 0)
            .map(|mask| weight[mask.count_ones() as usize] * (values[mask | bit] - values[mask]))
            .sum();
    }
    ShapValues {
        phi,
        base: values[0],
        std_err: None,
    }
}

fn sampled(model: &dyn Predictor, x: &[f64], bg: &[f64], samples: usize, rng: &mut ChaCha8Rng) -> ShapValues {
    let m = x.len();
    let base = model.predict_row(bg);
    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut row = bg.to_vec();
    for _ in 0..samples {
        order.shuffle(rng);
        row.copy_from_slice(bg);
        let mut prev = base;
        for &i in &order {
            row[i] = x[i];
            let cur = model.predict_row(&row);
            let d = cur - prev;
            sum[i] += d;
            sum_sq[i] += d * d;
            prev = cur;
        }
    }
    let n = samples as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = sum_sq
        .iter()
        .zip(&phi)
        .map(|(sq, mean)| ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    ShapValues {
        phi,
        base,
        std_err: Some(std_err),
    }
}

/// Shapley values of `model` at `x`, where a coalition's value is the model
/// output with absent features set to the background.
pub fn shap_values(model: &dyn Predictor, x: &[f64], cfg: &ShapConfig) -> Result<ShapValues> {
    shap_with_stream(model, x, cfg, 0)
}

fn shap_with_stream(model: &dyn Predictor, x: &[f64], cfg: &ShapConfig, stream: u64) -> Result<ShapValues> {
    let m = model.feature_names().len();
    if x.len() != m {
        return Err(Error::Parameter(format!("row has {} values for {m} features", x.len())));
    }
    cfg.validate(m)?;
    Ok(match cfg.mode {
        ShapMode::Exact => exact(model, x, &cfg.background),
        ShapMode::Sampled { samples } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream);
            sampled(model, x, &cfg.background, samples, &mut rng)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub features: Vec<String>,
    pub mean_signed: Vec<f64>,
    pub mean_abs: Vec<f64>,
    /// Sample standard deviation of the per-row values (0 for one row).
    pub std: Vec<f64>,
    pub base: f64,
    pub n_rows: usize,
}

/// Per-feature signed and absolute mean of Shapley values over the rows of
/// `ds`. With `max_rows`, an evenly strided subset of at most that many
/// rows is used. Rows are processed in parallel; results do not depend on
/// the thread count.
pub fn mean_shap(
    model: &dyn Predictor,
    ds: &Dataset,
    cfg: &ShapConfig,
    max_rows: Option<usize>,
) -> Result<ShapSummary> {
    let ds = ds.select(model.feature_names())?;
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::Degenerate("no rows to explain".into()));
    }
    cfg.validate(ds.n_features())?;
    let take = max_rows.map_or(n, |k| k.clamp(1, n));
    let rows: Vec<usize> = (0..take).map(|k| k * n / take).collect();
    let per_row = rows
        .par_iter()
        .map(|&i| shap_with_stream(model, ds.row(i), cfg, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let m = ds.n_features();
    let mut mean_signed = vec![0.0; m];
    let mut mean_abs = vec![0.0; m];
    for sv in &per_row {
        for j in 0..m {
            mean_signed[j] += sv.phi[j];
            mean_abs[j] += sv.phi[j].abs();
        }
    }
    let k = per_row.len() as f64;
    mean_signed.iter_mut().chain(mean_abs.iter_mut()).for_each(|v| *v /= k);
    let std = (0..m)
        .map(|j| {
            if per_row.len() < 2 {
                return 0.0;
            }
            let ss: f64 = per_row.iter().map(|sv| (sv.phi[j] - mean_signed[j]).powi(2)).sum();
            (ss / (k - 1.0)).sqrt()
        })
        .collect();
    Ok(ShapSummary {
        features: ds.names().to_vec(),
        mean_signed,
        mean_abs,
        std,
        base: per_row[0].base,
        n_rows: per_row.len(),
    })
}
