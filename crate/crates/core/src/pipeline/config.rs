use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DEFAULT_MULTI_EVENT_THRESHOLD;
use crate::eval::DEFAULT_GAMMA;
use crate::explain::{PermLoss, Perturbation, ShapMode};
use crate::models::{Hyperparams, ModelKind, SearchSpace};
use crate::spatial::ImputeOptions;
use crate::stats::{TTestVariant, DEFAULT_CONTINUOUS_BINS};
use crate::synth::Scenario;
use crate::{Error, Result};

/// Where station data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    /// A generated station; without a scenario the default diurnal one is used.
    Synthetic {
        #[serde(default)]
        scenario: Option<Scenario>,
    },
    Files {
        readings: PathBuf,
        events: PathBuf,
        stations: PathBuf,
        sensors: PathBuf,
        #[serde(default)]
        travel_times: Option<PathBuf>,
    },
}

impl InputConfig {
    pub fn scenario(&self) -> Option<Scenario> {
        match self {
            InputConfig::Synthetic { scenario } => Some(scenario.clone().unwrap_or_else(Scenario::default_diurnal)),
            InputConfig::Files { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Number of sampled configurations; 0 keeps `hyperparams` as given.
    pub budget: usize,
    pub folds: usize,
    pub space: SearchSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 0,
            folds: 5,
            space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapChoice {
    /// Exact enumeration up to [`AUTO_EXACT_MAX_FEATURES`] features, sampling beyond.
    #[default]
    Auto,
    Exact,
    Sampled,
}

/// Feature count up to which `auto` enumerates coalitions exactly.
pub const AUTO_EXACT_MAX_FEATURES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapSettings {
    pub mode: ShapChoice,
    /// Permutations per row when sampling.
    pub samples: usize,
    /// Evaluation rows explained per model (evenly strided); `None` uses all.
    pub max_rows: Option<usize>,
}

impl Default for ShapSettings {
    fn default() -> Self {
        ShapSettings {
            mode: ShapChoice::Auto,
            samples: 2048,
            max_rows: Some(1000),
        }
    }
}

impl ShapSettings {
    pub fn resolve(&self, n_features: usize) -> ShapMode {
        match self.mode {
            ShapChoice::Exact => ShapMode::Exact,
            ShapChoice::Auto if n_features <= AUTO_EXACT_MAX_FEATURES => ShapMode::Exact,
            ShapChoice::Auto | ShapChoice::Sampled => ShapMode::Sampled { samples: self.samples },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermSettings {
    pub repeats: usize,
    pub loss: PermLoss,
    pub perturbation: Perturbation,
}

impl Default for PermSettings {
    fn default() -> Self {
        PermSettings {
            repeats: 10,
            loss: PermLoss::OneMinusAuc,
            perturbation: Perturbation::Permute,
        }
    }
}

fn default_filter() -> f64 {
    DEFAULT_MULTI_EVENT_THRESHOLD
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_gammas() -> Vec<f64> {
    vec![DEFAULT_GAMMA]
}

fn default_iv_bins() -> usize {
    DEFAULT_CONTINUOUS_BINS
}

/// One JSON document describing a full run. Only `seed` and `input` are
/// required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub input: InputConfig,
    /// Restrict the run to these stations (after filtering).
    #[serde(default)]
    pub stations: Option<Vec<String>>,
    /// Stations whose share of multi-event hours reaches this value are dropped.
    #[serde(default = "default_filter")]
    pub station_filter: f64,
    /// First evaluation hour; defaults to January 1 of the last year in the data.
    #[serde(default)]
    pub eval_start: Option<NaiveDateTime>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub shap: ShapSettings,
    #[serde(default)]
    pub permutation: PermSettings,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub impute: ImputeOptions,
    #[serde(default = "default_iv_bins")]
    pub iv_bins: usize,
    #[serde(default)]
    pub t_test: TTestVariant,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// A synthetic run of the default scenario with every other setting at
    /// its default.
    pub fn synthetic(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({
            "seed": seed,
            "input": {"source": "synthetic"},
        }))
        .expect("minimal config is valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory and must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InputConfig::Files {
            readings,
            events,
            stations,
            sensors,
            travel_times,
        } = &mut self.input
        {
            fix(readings);
            fix(events);
            fix(stations);
            fix(sensors);
            if let Some(t) = travel_times {
                fix(t);
            }
        }
        if let Some(o) = &mut self.out_dir {
            fix(o);
        }
    }

    pub fn check_paths(&self) -> Result<()> {
        if let InputConfig::Files {
            readings,
            events,
            stations,
            sensors,
            travel_times,
        } = &self.input
        {
            for p in [readings, events, stations, sensors].into_iter().chain(travel_times) {
                if !p.is_file() {
                    return Err(Error::Config(format!("input file {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.station_filter > 0.0 && self.station_filter < 1.0) {
            return fail(format!(
                "station_filter must lie in (0, 1), got {}",
                self.station_filter
            ));
        }
        if self.models.is_empty() {
            return fail("models must not be empty".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].contains(m) {
                return fail(format!("model `{m}` listed twice"));
            }
        }
        if let Some(g) = self.gammas.iter().find(|g| !(0.0..1.0).contains(*g)) {
            return fail(format!("gamma {g} outside [0, 1)"));
        }
        if self.iv_bins == 0 {
            return fail("iv_bins must be positive".into());
        }
        if self.permutation.repeats == 0 {
            return fail("permutation.repeats must be at least 1".into());
        }
        if self.search.folds < 2 {
            return fail("search.folds must be at least 2".into());
        }
        if self.shap.mode != ShapChoice::Exact && self.shap.samples < 64 {
            return fail(format!("shap.samples must be at least 64, got {}", self.shap.samples));
        }
        if self.shap.max_rows == Some(0) {
            return fail("shap.max_rows must be positive".into());
        }
        self.hyperparams
            .gbdt
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.hyperparams
            .mlp
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(s) = self.input.scenario() {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical serialization, the bytes the manifest hash covers.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
