//! End-to-end runs: ingestion or synthesis, imputation, filtering,
//! statistics, training, evaluation and attribution, and the on-disk report.

mod config;
mod report;
mod stages;
mod workdir;

use rayon::prelude::*;

pub use config::{
    InputConfig, PermSettings, RunConfig, SearchConfig, ShapChoice, ShapSettings, AUTO_EXACT_MAX_FEATURES,
};
pub use report::{emit_report, fmt6, station_dir_name, Manifest, ReportBundle, StationReport};
pub use stages::{
    evaluate_models, explain_models, explained_kinds, ingest_station, load_inputs, parse_scenario_files, prepare,
    select_stations, station_statistics, synth_files, train_models, Exclusion, GammaEntry, Inputs, IvEntry, ModelEntry,
    ModelEvaluation, ModelImportance, Prepared, StationData, StationSelection, StatsReport, TestEntry,
};
pub use workdir::{restrict, WorkDir};

use crate::Result;

/// Runs every stage for one station.
pub fn run_station(cfg: &RunConfig, inputs: &Inputs, station_id: &str) -> Result<StationReport> {
    let data = ingest_station(cfg, inputs, station_id).map_err(|e| e.in_stage("ingest", station_id))?;
    report_for(cfg, &data)
}

/// Stages after ingestion, shared by [`run_station`] and the resumable CLI path.
pub fn report_for(cfg: &RunConfig, data: &StationData) -> Result<StationReport> {
    let id = data.station_id.as_str();
    let prepared = prepare(cfg, data).map_err(|e| e.in_stage("prepare", id))?;
    let stats = station_statistics(cfg, &prepared).map_err(|e| e.in_stage("stats", id))?;
    let models = train_models(cfg, &prepared).map_err(|e| e.in_stage("train", id))?;
    let evals = evaluate_models(cfg, &prepared, &models).map_err(|e| e.in_stage("eval", id))?;
    let importance = explain_models(cfg, &prepared, &models).map_err(|e| e.in_stage("explain", id))?;
    Ok(StationReport::assemble(data, &prepared, stats, evals, importance))
}

/// Runs the whole pipeline in memory. Stations are processed in parallel;
/// the bundle lists them in id order regardless of scheduling.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let selection = select_stations(cfg, &inputs)?;
    log::info!(
        "{} station(s) selected, {} excluded",
        selection.selected.len(),
        selection.excluded.len()
    );
    let stations = selection
        .selected
        .par_iter()
        .map(|id| run_station(cfg, &inputs, id))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest::new(cfg, selection.selected.clone(), selection.excluded);
    Ok(ReportBundle::new(manifest, stations))
}
