//! The individual pipeline stages. Each takes the run config plus the
//! previous stage's output, so the CLI can persist and resume between them.

use std::collections::BTreeSet;
use std::io::Cursor;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::data::{
    build_feature_table, default_eval_start, normalize_minmax, parse_events, parse_readings, read_events,
    read_readings, split_at, Events, FeatureKind, FeatureTable, Readings, StationStats,
};
use crate::eval::{gamma_precision, precision_curve, roc_auc, roc_curve, GammaPrecision, PrecisionCurve, RocPoint};
use crate::explain::{
    mean_shap, permutation_importance, ImportanceReport, PermConfig, PermResult, ShapConfig, ShapSummary,
};
use crate::models::{train, tune_random_search, Dataset, ModelKind, Predictor, TrainedModel};
use crate::spatial::{assemble_station, load_catalog, parse_sensors, parse_stations, ImputeSummary, StationCatalog};
use crate::stats::{
    chi_squared_test, information_value, pearson_corr_matrix, t_test_two_sample, CorrMatrix, IvResult, TestResult,
};
use crate::synth::{generate, write_scenario_files, ScenarioFiles};
use crate::{Error, Result};

/// Parsed input files.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub readings: Readings,
    pub events: Events,
    pub catalog: StationCatalog,
}

/// Generates the configured synthetic station in the input file formats;
/// `None` for file-based runs.
pub fn synth_files(cfg: &RunConfig) -> Result<Option<ScenarioFiles>> {
    match cfg.input.scenario() {
        Some(s) => {
            let table = generate(&s, cfg.seed)?;
            Ok(Some(write_scenario_files(&s, &table)?))
        }
        None => Ok(None),
    }
}

pub fn parse_scenario_files(files: &ScenarioFiles) -> Result<Inputs> {
    let readings = parse_readings(Cursor::new(files.readings.as_bytes()), "readings.csv")?;
    let events = parse_events(Cursor::new(files.events.as_bytes()), "events.csv")?;
    let stations = parse_stations(Cursor::new(files.stations.as_bytes()), "stations.csv")?;
    let sensors = parse_sensors(Cursor::new(files.sensors.as_bytes()), "sensors.csv")?;
    Ok(Inputs {
        readings,
        events,
        catalog: StationCatalog::new(stations, sensors, None)?,
    })
}

/// Loads the configured inputs. Synthetic inputs go through the same CSV
/// parsers as real files.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    match &cfg.input {
        super::InputConfig::Files {
            readings,
            events,
            stations,
            sensors,
            travel_times,
        } => Ok(Inputs {
            readings: read_readings(readings)?,
            events: read_events(events)?,
            catalog: load_catalog(stations, sensors, travel_times.as_deref())?,
        }),
        super::InputConfig::Synthetic { .. } => {
            let files = synth_files(cfg)?.expect("synthetic input yields files");
            parse_scenario_files(&files)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub station_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSelection {
    pub stats: Vec<StationStats>,
    pub selected: Vec<String>,
    pub excluded: Vec<Exclusion>,
}

/// Applies the multi-event filter and the optional station list.
pub fn select_stations(cfg: &RunConfig, inputs: &Inputs) -> Result<StationSelection> {
    let mut stats = Vec::new();
    let mut excluded = Vec::new();
    for id in inputs.events.station_ids() {
        if inputs.catalog.station(id).is_err() {
            excluded.push(Exclusion {
                station_id: id.to_string(),
                reason: "not in station catalog".into(),
            });
            continue;
        }
        stats.push(build_feature_table(&inputs.readings, &inputs.events, id)?.stats()?);
    }
    let kept: BTreeSet<String> = crate::data::filter_stations(&stats, cfg.station_filter)?
        .into_iter()
        .collect();
    for s in &stats {
        if !kept.contains(&s.station_id) {
            excluded.push(Exclusion {
                station_id: s.station_id.clone(),
                reason: format!(
                    "multi-event hours {:.4} reach the {} threshold",
                    s.pct_multi_hours, cfg.station_filter
                ),
            });
        }
    }
    let selected = match &cfg.stations {
        None => kept.into_iter().collect(),
        Some(wanted) => {
            for w in wanted {
                if !stats.iter().any(|s| &s.station_id == w) {
                    return Err(Error::Lookup {
                        kind: "station",
                        id: w.clone(),
                    });
                }
            }
            kept.into_iter().filter(|k| wanted.contains(k)).collect()
        }
    };
    excluded.sort_by(|a, b| a.station_id.cmp(&b.station_id));
    Ok(StationSelection {
        stats,
        selected,
        excluded,
    })
}

/// A station's imputed feature table, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationData {
    pub station_id: String,
    pub table: FeatureTable,
    pub imputation: ImputeSummary,
}

pub fn ingest_station(cfg: &RunConfig, inputs: &Inputs, station_id: &str) -> Result<StationData> {
    let (table, imputation) = assemble_station(
        &inputs.readings,
        &inputs.events,
        &inputs.catalog,
        station_id,
        &cfg.impute,
    )?;
    Ok(StationData {
        station_id: station_id.to_string(),
        table: table.with_time_features()?,
        imputation,
    })
}

/// Normalized train/eval split of one station.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub eval_start: NaiveDateTime,
    /// Whole span scaled with the training bounds.
    pub full: FeatureTable,
    pub train: Dataset,
    pub eval: Dataset,
    pub train_span: Option<(NaiveDateTime, NaiveDateTime)>,
    pub dropped_train_rows: usize,
    pub dropped_eval_rows: usize,
}

pub fn prepare(cfg: &RunConfig, data: &StationData) -> Result<Prepared> {
    let eval_start = match cfg.eval_start {
        Some(t) => t,
        None => default_eval_start(&data.table)?,
    };
    let (train_t, eval_t) = split_at(&data.table, eval_start);
    if train_t.n_rows() == 0 {
        return Err(Error::Degenerate(format!("no training hours before {eval_start}")));
    }
    let (train_n, bounds) = normalize_minmax(&train_t)?;
    let eval_n = bounds.apply(&eval_t)?;
    let full = bounds.apply(&data.table)?;
    let (train, dropped_train_rows) = Dataset::from_table(&train_n)?;
    let (eval, dropped_eval_rows) = Dataset::from_table(&eval_n)?;
    let ts = train_t.timestamps();
    Ok(Prepared {
        eval_start,
        full,
        train,
        eval,
        train_span: Some((ts[0], ts[ts.len() - 1])),
        dropped_train_rows,
        dropped_eval_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub feature: String,
    pub result: Option<TestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvEntry {
    pub feature: String,
    pub result: Option<IvResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub corr: CorrMatrix,
    pub tests: Vec<TestEntry>,
    pub iv: Vec<IvEntry>,
}

fn degenerate_note<T>(r: Result<T>) -> Result<(Option<T>, Option<String>)> {
    match r {
        Ok(v) => Ok((Some(v), None)),
        Err(e @ (Error::Degenerate(_) | Error::Domain(_) | Error::EmptyColumn(_))) => Ok((None, Some(e.to_string()))),
        Err(e) => Err(e),
    }
}

/// Correlations, independence tests and information values over the whole
/// normalized span. Categorical features get a chi-squared test, continuous
/// ones a two-sample t-test; missing cells are skipped per feature.
pub fn station_statistics(cfg: &RunConfig, prepared: &Prepared) -> Result<StatsReport> {
    let table = &prepared.full;
    let corr = pearson_corr_matrix(table, true)?;
    let mut tests = Vec::new();
    let mut iv = Vec::new();
    for col in table.columns() {
        let (values, labels): (Vec<f64>, Vec<u8>) = col
            .iter()
            .zip(table.labels())
            .filter_map(|(v, &y)| v.map(|v| (v, y)))
            .unzip();
        let test = match col.kind() {
            FeatureKind::Categorical { .. } => {
                let cats: Vec<usize> = values.iter().map(|&v| col.kind().class_of(v).unwrap_or(0)).collect();
                chi_squared_test(&cats, &labels)
            }
            FeatureKind::Continuous => t_test_two_sample(&values, &labels, cfg.t_test),
        }
        .map(|mut r| {
            r.feature = col.name().to_string();
            r
        });
        let (result, note) = degenerate_note(test)?;
        tests.push(TestEntry {
            feature: col.name().to_string(),
            result,
            note,
        });
        let (result, note) = degenerate_note(information_value(col.name(), &values, &labels, cfg.iv_bins, col.kind()))?;
        iv.push(IvEntry {
            feature: col.name().to_string(),
            result,
            note,
        });
    }
    Ok(StatsReport { corr, tests, iv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub kind: ModelKind,
    pub model: Option<TrainedModel>,
    pub note: Option<String>,
}

pub fn train_models(cfg: &RunConfig, prepared: &Prepared) -> Result<Vec<ModelEntry>> {
    cfg.models
        .iter()
        .map(|&kind| {
            let fitted = tune_random_search(
                &prepared.train,
                kind,
                &cfg.hyperparams,
                &cfg.search.space,
                cfg.search.folds,
                cfg.search.budget,
                cfg.seed,
            )
            .and_then(|hp| train(kind, &prepared.train, &hp, cfg.seed, prepared.train_span));
            let (model, note) = degenerate_note(fitted)?;
            Ok(ModelEntry { kind, model, note })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub gamma: f64,
    pub result: GammaPrecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: ModelKind,
    pub auc: Option<f64>,
    pub gammas: Vec<GammaEntry>,
    pub roc: Vec<RocPoint>,
    pub precision: Option<PrecisionCurve>,
    pub note: Option<String>,
}

impl ModelEvaluation {
    fn degenerate(model: ModelKind, note: String) -> Self {
        ModelEvaluation {
            model,
            auc: None,
            gammas: Vec::new(),
            roc: Vec::new(),
            precision: None,
            note: Some(note),
        }
    }
}

/// AUC, ROC and class-zero precision of every trained model on the
/// evaluation rows.
pub fn evaluate_models(cfg: &RunConfig, prepared: &Prepared, models: &[ModelEntry]) -> Result<Vec<ModelEvaluation>> {
    let ds = &prepared.eval;
    models
        .iter()
        .map(|entry| {
            let Some(model) = &entry.model else {
                return Ok(ModelEvaluation::degenerate(
                    entry.kind,
                    entry.note.clone().unwrap_or_else(|| "not trained".into()),
                ));
            };
            let scores = model.predict(ds)?;
            let (auc, note) = degenerate_note(roc_auc(&scores, ds.labels()))?;
            let roc = if auc.is_some() {
                roc_curve(&scores, ds.labels())?
            } else {
                Vec::new()
            };
            if ds.n_rows() == 0 {
                return Ok(ModelEvaluation::degenerate(entry.kind, "no evaluation rows".into()));
            }
            let prob_zero: Vec<f64> = scores.iter().map(|p| 1.0 - p).collect();
            let curve = precision_curve(&prob_zero, ds.labels(), None)?;
            let gammas = cfg
                .gammas
                .iter()
                .map(|&gamma| {
                    Ok(GammaEntry {
                        gamma,
                        result: gamma_precision(&curve, gamma)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ModelEvaluation {
                model: entry.kind,
                auc,
                gammas,
                roc,
                precision: Some(curve),
                note,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelImportance {
    pub model: ModelKind,
    pub shap: Option<ShapSummary>,
    pub perm: Option<PermResult>,
    pub report: Option<ImportanceReport>,
    pub notes: Vec<String>,
}

/// Models that get attribution reports.
pub fn explained_kinds(cfg: &RunConfig) -> Vec<ModelKind> {
    cfg.models.iter().copied().filter(|k| *k != ModelKind::Prior).collect()
}

/// Shapley summaries (training means as background) and permutation
/// importance on the evaluation rows, for the tree and network models.
pub fn explain_models(cfg: &RunConfig, prepared: &Prepared, models: &[ModelEntry]) -> Result<Vec<ModelImportance>> {
    let ds = &prepared.eval;
    models
        .iter()
        .filter(|e| e.kind != ModelKind::Prior)
        .map(|entry| {
            let mut out = ModelImportance {
                model: entry.kind,
                shap: None,
                perm: None,
                report: None,
                notes: Vec::new(),
            };
            let Some(model) = &entry.model else {
                out.notes
                    .push(entry.note.clone().unwrap_or_else(|| "not trained".into()));
                return Ok(out);
            };
            if ds.n_rows() == 0 {
                out.notes.push("no evaluation rows".into());
                return Ok(out);
            }
            let names = model.feature_names();
            let shap_cfg = ShapConfig {
                mode: cfg.shap.resolve(names.len()),
                background: prepared.train.select(names)?.means(),
                seed: cfg.seed,
            };
            let shap = mean_shap(model, ds, &shap_cfg, cfg.shap.max_rows)?;
            let perm_cfg = PermConfig {
                loss: cfg.permutation.loss,
                repeats: cfg.permutation.repeats,
                seed: cfg.seed,
                perturbation: cfg.permutation.perturbation,
            };
            let (perm, note) = degenerate_note(permutation_importance(model, ds, &perm_cfg))?;
            out.notes.extend(note);
            out.report = Some(ImportanceReport::build(&shap, perm.as_ref())?);
            out.shap = Some(shap);
            out.perm = perm;
            Ok(out)
        })
        .collect()
}
