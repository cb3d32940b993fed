use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::report::station_dir_name;
use super::stages::{
    load_inputs, prepare, Inputs, ModelEntry, ModelEvaluation, ModelImportance, StationData, StationSelection,
    StatsReport,
};
use super::{InputConfig, Manifest, ReportBundle, RunConfig, StationReport};
use crate::data::{read_events, read_readings};
use crate::models::{ModelKind, TrainedModel};
use crate::spatial::load_catalog;
use crate::synth::ScenarioFiles;
use crate::{Error, Result};

const READINGS: &str = "readings.csv";
const EVENTS: &str = "events.csv";
const STATIONS: &str = "stations.csv";
const SENSORS: &str = "sensors.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelIndexEntry {
    kind: ModelKind,
    file: Option<String>,
    note: Option<String>,
}

/// Output directory layout: generated inputs in `data/`, per-stage
/// intermediates in `work/`, the final bundle in `report/`.
#[derive(Debug, Clone)]
pub struct WorkDir {
    root: PathBuf,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        WorkDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    fn work(&self) -> PathBuf {
        self.root.join("work")
    }

    fn station(&self, id: &str) -> PathBuf {
        self.work().join(station_dir_name(id))
    }

    fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_vec_pretty(value)?)?;
        Ok(())
    }

    fn load<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("missing {}; run the `{stage}` step first", path.display()))
            }
            _ => Error::Io(e),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn write_inputs(&self, files: &ScenarioFiles) -> Result<()> {
        let dir = self.data_dir();
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(READINGS), &files.readings)?;
        fs::write(dir.join(EVENTS), &files.events)?;
        fs::write(dir.join(STATIONS), &files.stations)?;
        fs::write(dir.join(SENSORS), &files.sensors)?;
        Ok(())
    }

    /// Inputs for the run. Synthetic runs read `data/` when a previous
    /// `synth` step wrote it and generate in memory otherwise.
    pub fn inputs(&self, cfg: &RunConfig) -> Result<Inputs> {
        let dir = self.data_dir();
        if matches!(cfg.input, InputConfig::Synthetic { .. }) && dir.join(EVENTS).is_file() {
            return Ok(Inputs {
                readings: read_readings(&dir.join(READINGS))?,
                events: read_events(&dir.join(EVENTS))?,
                catalog: load_catalog(&dir.join(STATIONS), &dir.join(SENSORS), None)?,
            });
        }
        load_inputs(cfg)
    }

    pub fn save_selection(&self, s: &StationSelection) -> Result<()> {
        Self::save(&self.work().join("stations.json"), s)
    }

    pub fn load_selection(&self) -> Result<StationSelection> {
        Self::load(&self.work().join("stations.json"), "ingest")
    }

    pub fn save_station_data(&self, d: &StationData) -> Result<()> {
        Self::save(&self.station(&d.station_id).join("table.json"), d)
    }

    pub fn load_station_data(&self, id: &str) -> Result<StationData> {
        Self::load(&self.station(id).join("table.json"), "ingest")
    }

    pub fn save_stats(&self, id: &str, s: &StatsReport) -> Result<()> {
        Self::save(&self.station(id).join("stats.json"), s)
    }

    pub fn load_stats(&self, id: &str) -> Result<StatsReport> {
        Self::load(&self.station(id).join("stats.json"), "stats")
    }

    /// Trained models go to `models/<kind>.json`, one versioned document each.
    pub fn save_models(&self, id: &str, models: &[ModelEntry]) -> Result<()> {
        let dir = self.station(id).join("models");
        fs::create_dir_all(&dir)?;
        let mut index = Vec::new();
        for m in models {
            let file = match &m.model {
                Some(model) => {
                    let name = format!("{}.json", m.kind);
                    fs::write(dir.join(&name), model.to_json()?)?;
                    Some(name)
                }
                None => None,
            };
            index.push(ModelIndexEntry {
                kind: m.kind,
                file,
                note: m.note.clone(),
            });
        }
        Self::save(&dir.join("index.json"), &index)
    }

    pub fn load_models(&self, id: &str) -> Result<Vec<ModelEntry>> {
        let dir = self.station(id).join("models");
        let index: Vec<ModelIndexEntry> = Self::load(&dir.join("index.json"), "train")?;
        index
            .into_iter()
            .map(|e| {
                let model = match &e.file {
                    Some(f) => Some(TrainedModel::from_json(&fs::read_to_string(dir.join(f))?)?),
                    None => None,
                };
                Ok(ModelEntry {
                    kind: e.kind,
                    model,
                    note: e.note,
                })
            })
            .collect()
    }

    pub fn save_evaluations(&self, id: &str, e: &[ModelEvaluation]) -> Result<()> {
        Self::save(&self.station(id).join("eval.json"), &e)
    }

    pub fn load_evaluations(&self, id: &str) -> Result<Vec<ModelEvaluation>> {
        Self::load(&self.station(id).join("eval.json"), "eval")
    }

    pub fn save_importance(&self, id: &str, i: &[ModelImportance]) -> Result<()> {
        Self::save(&self.station(id).join("importance.json"), &i)
    }

    pub fn load_importance(&self, id: &str) -> Result<Vec<ModelImportance>> {
        Self::load(&self.station(id).join("importance.json"), "explain")
    }

    /// Rebuilds the report bundle from saved intermediates.
    pub fn build_bundle(&self, cfg: &RunConfig, station: Option<&str>) -> Result<ReportBundle> {
        let selection = self.load_selection()?;
        let ids = restrict(&selection.selected, station)?;
        let stations = ids
            .iter()
            .map(|id| {
                let data = self.load_station_data(id)?;
                let prepared = prepare(cfg, &data)?;
                Ok(StationReport::assemble(
                    &data,
                    &prepared,
                    self.load_stats(id)?,
                    self.load_evaluations(id)?,
                    self.load_importance(id)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest::new(cfg, ids, selection.excluded);
        Ok(ReportBundle::new(manifest, stations))
    }
}

/// The selected stations, or just `station` when given (which must be selected).
pub fn restrict(selected: &[String], station: Option<&str>) -> Result<Vec<String>> {
    match station {
        None => Ok(selected.to_vec()),
        Some(s) if selected.iter().any(|x| x == s) => Ok(vec![s.to_string()]),
        Some(s) => Err(Error::Lookup {
            kind: "selected station",
            id: s.to_string(),
        }),
    }
}
