//! Probability models for "at least one event in this hour": a boosted tree
//! ensemble, a small feed-forward network and the hour-of-day Prior.
//!
//! Trained models are plain data ([`TrainedModel`]) that serialize to a
//! versioned JSON document and predict through the [`Predictor`] trait.

mod dataset;
mod gbdt;
mod mlp;
mod prior;
mod tune;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use dataset::Dataset;
pub use gbdt::{train_gbdt, GbdtModel, Node, Tree};
pub use mlp::{train_mlp, Dense, MlpModel};
pub use prior::{fit_prior, PriorModel};
pub use tune::{tune_random_search, SearchSpace};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Anything that maps a feature row to a probability of class 1.
pub trait Predictor: Sync {
    /// Names of the features `predict_row` expects, in order.
    fn feature_names(&self) -> &[String];

    fn predict_row(&self, row: &[f64]) -> f64;

    /// Scores every row of `ds`, reordering columns by name first.
    fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let ds = ds.select(self.feature_names())?;
        Ok(ds.rows().map(|r| self.predict_row(r)).collect())
    }
}

/// Adapts a closure into a [`Predictor`].
pub struct FnModel<F> {
    names: Vec<String>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(names: Vec<String>, f: F) -> Self {
        FnModel { names, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnModel<F> {
    fn feature_names(&self) -> &[String] {
        &self.names
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    Mlp,
    Prior,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gbdt, ModelKind::Mlp, ModelKind::Prior];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::Mlp => "mlp",
            ModelKind::Prior => "prior",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbdt" => Ok(ModelKind::Gbdt),
            "mlp" => Ok(ModelKind::Mlp),
            "prior" => Ok(ModelKind::Prior),
            _ => Err(Error::Parameter(format!("unknown model kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub min_child_weight: f64,
    /// Fraction of rows drawn (Bernoulli, seeded) for each tree.
    pub subsample: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            l2_lambda: 1.0,
            min_child_weight: 1.0,
            subsample: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_depth >= 1
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.l2_lambda >= 0.0
            && self.min_child_weight >= 0.0
            && self.subsample > 0.0
            && self.subsample <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid gbdt hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// Trailing share of the training rows held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![32, 16],
            dropout: 0.1,
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 200,
            patience: 10,
            validation_fraction: 0.2,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden.iter().all(|&h| h > 0)
            && (0.0..1.0).contains(&self.dropout)
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.batch_size > 0
            && self.patience > 0
            && (0.0..1.0).contains(&self.validation_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid mlp hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gbdt: GbdtParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub hyperparams: Hyperparams,
    pub train_start: Option<NaiveDateTime>,
    pub train_end: Option<NaiveDateTime>,
    pub n_train_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Gbdt(GbdtModel),
    Mlp(MlpModel),
    Prior(PriorModel),
}

/// A fitted model together with how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub meta: ModelMeta,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Gbdt(_) => ModelKind::Gbdt,
            ModelParams::Mlp(_) => ModelKind::Mlp,
            ModelParams::Prior(_) => ModelKind::Prior,
        }
    }

    pub fn predict_proba(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.predict(ds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and structurally validates a model document.
    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let m = self.meta.feature_names.len();
        match &self.params {
            ModelParams::Gbdt(g) => g.validate(m),
            ModelParams::Mlp(n) => n.validate(m),
            ModelParams::Prior(p) => {
                if self.meta.feature_names != [prior::HOUR_FEATURE] {
                    return Err(Error::Schema("prior model must use exactly the `hour` feature".into()));
                }
                p.validate()
            }
        }
    }
}

impl Predictor for TrainedModel {
    fn feature_names(&self) -> &[String] {
        &self.meta.feature_names
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Gbdt(g) => g.predict_row(row),
            ModelParams::Mlp(n) => n.predict_row(row),
            ModelParams::Prior(p) => p.predict_row(row),
        }
    }
}

/// Trains a model of the given kind on `ds`.
///
/// The Prior only reads the `hour` column; the other kinds use every column.
pub fn train(
    kind: ModelKind,
    ds: &Dataset,
    hp: &Hyperparams,
    seed: u64,
    span: Option<(NaiveDateTime, NaiveDateTime)>,
) -> Result<TrainedModel> {
    let (params, feature_names) = match kind {
        ModelKind::Gbdt => (ModelParams::Gbdt(train_gbdt(ds, &hp.gbdt, seed)?), ds.names().to_vec()),
        ModelKind::Mlp => (ModelParams::Mlp(train_mlp(ds, &hp.mlp, seed)?), ds.names().to_vec()),
        ModelKind::Prior => {
            let j = ds
                .index_of(prior::HOUR_FEATURE)
                .ok_or_else(|| Error::Schema("prior model needs an `hour` column".into()))?;
            let hours: Vec<usize> = ds.column(j).into_iter().map(crate::data::hour_index).collect();
            (
                ModelParams::Prior(fit_prior(&hours, ds.labels())?),
                vec![prior::HOUR_FEATURE.to_string()],
            )
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        meta: ModelMeta {
            seed,
            feature_names,
            hyperparams: hp.clone(),
            train_start: span.map(|s| s.0),
            train_end: span.map(|s| s.1),
            n_train_rows: ds.n_rows(),
        },
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let xs: Vec<f64> = (0..48).map(|i| (i % 24) as f64 / 23.0).collect();
        let ys: Vec<f64> = (0..48).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let labels = xs.iter().map(|&x| u8::from(x > 0.5)).collect();
        Dataset::from_columns(vec!["hour".into(), "y".into()], &[xs, ys], labels).unwrap()
    }

    fn small() -> Hyperparams {
        Hyperparams {
            gbdt: GbdtParams {
                n_trees: 5,
                ..GbdtParams::default()
            },
            mlp: MlpParams {
                epochs: 3,
                hidden: vec![4],
                ..MlpParams::default()
            },
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let ds = toy();
        for kind in ModelKind::ALL {
            let m = train(kind, &ds, &small(), 3, None).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.kind(), kind);
            assert_eq!(m.predict_proba(&ds).unwrap(), back.predict_proba(&ds).unwrap());
        }
    }

    #[test]
    fn predict_reorders_columns_by_name() {
        let ds = toy();
        let m = train(ModelKind::Gbdt, &ds, &small(), 0, None).unwrap();
        let swapped = ds.select(&["y".into(), "hour".into()]).unwrap();
        assert_eq!(m.predict_proba(&ds).unwrap(), m.predict_proba(&swapped).unwrap());
    }

    #[test]
    fn missing_feature_is_schema_error() {
        let ds = toy();
        let m = train(ModelKind::Gbdt, &ds, &small(), 0, None).unwrap();
        let only_hour = ds.select(&["hour".into()]).unwrap();
        assert!(matches!(m.predict_proba(&only_hour), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_bad_documents() {
        let ds = toy();
        let m = train(ModelKind::Gbdt, &ds, &small(), 0, None).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["format_version"] = 7.into();
        assert!(TrainedModel::from_json(&v.to_string()).is_err());
        v["format_version"] = 1.into();
        v["params"]["trees"][0]["nodes"][0] =
            serde_json::json!({"split": {"feature": 0, "threshold": 0.5, "left": 0, "right": 0}});
        assert!(TrainedModel::from_json(&v.to_string()).is_err());
        assert!(TrainedModel::from_json("{").is_err());
    }

    #[test]
    fn kind_parses() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
