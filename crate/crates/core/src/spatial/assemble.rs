use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{
    fill_daily, idw_weights, impute_traffic, impute_weighted, IdwExponent, SensorKind, StationCatalog, TrafficMethod,
    DEFAULT_CORR_THRESHOLD,
};
use crate::data::{build_feature_table, Column, Events, FeatureKind, FeatureTable, Readings, SeriesKey};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeOptions {
    pub idw_exponent: f64,
    pub idw_sign: IdwExponent,
    pub traffic_corr_threshold: f64,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions {
            idw_exponent: 3.0,
            idw_sign: IdwExponent::Inverse,
            traffic_corr_threshold: DEFAULT_CORR_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFill {
    pub parameter: String,
    pub kind: SensorKind,
    pub sensors: Vec<String>,
    pub detail: String,
    /// Hours still missing after imputation.
    pub missing_hours: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeSummary {
    pub parameters: Vec<ParameterFill>,
}

fn distance(catalog: &StationCatalog, station_id: &str, sensor_id: &str) -> Result<f64> {
    let st = catalog.station(station_id)?;
    let se = catalog.sensor(sensor_id)?;
    Ok((st.x - se.x).hypot(st.y - se.y))
}

fn nearest<'a>(catalog: &StationCatalog, station_id: &str, sensors: &'a [String]) -> Result<&'a String> {
    let mut best: Option<(f64, &String)> = None;
    for s in sensors {
        let d = distance(catalog, station_id, s)?;
        if best.is_none_or(|(bd, bid)| d < bd || (d == bd && s < bid)) {
            best = Some((d, s));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::Schema("no sensors for parameter".into()))
}

/// Builds a station's feature table with one imputed column per measured
/// parameter.
///
/// Weather parameters average every sensor recording them with inverse
/// distance weights. Traffic parameters use the closest counting point,
/// gap-filled from the other points. Air-quality parameters use the closest
/// sensor's daily values repeated over each hour of the day.
pub fn assemble_station(
    readings: &Readings,
    events: &Events,
    catalog: &StationCatalog,
    station_id: &str,
    opts: &ImputeOptions,
) -> Result<(FeatureTable, ImputeSummary)> {
    catalog.station(station_id)?;
    let raw = build_feature_table(readings, events, station_id)?;
    let start = raw.timestamps()[0];
    let len = raw.n_rows();

    let mut by_param: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for key in readings.series().keys() {
        by_param
            .entry(key.parameter.clone())
            .or_default()
            .push(key.sensor_id.clone());
    }

    let mut columns = Vec::new();
    let mut summary = ImputeSummary::default();
    for (param, sensors) in &by_param {
        let kind = catalog.sensor(&sensors[0])?.kind;
        for s in &sensors[1..] {
            if catalog.sensor(s)?.kind != kind {
                return Err(Error::Schema(format!(
                    "parameter `{param}` is recorded by sensors of different kinds"
                )));
            }
        }
        let grid = |sensor: &str| {
            readings.on_grid(
                &SeriesKey {
                    sensor_id: sensor.to_string(),
                    parameter: param.clone(),
                },
                start,
                len,
            )
        };
        let (cells, used, detail): (Vec<Option<f64>>, Vec<String>, String) = match kind {
            SensorKind::Weather => {
                let d = sensors
                    .iter()
                    .map(|s| distance(catalog, station_id, s))
                    .collect::<Result<Vec<f64>>>()?;
                let w = idw_weights(&d, opts.idw_exponent, opts.idw_sign)?;
                let series: Vec<Vec<Option<f64>>> = sensors.iter().map(|s| grid(s)).collect();
                let out = impute_weighted(&series, &w)?;
                let detail = format!("idw s={} over {} sensors", opts.idw_exponent, sensors.len());
                (out.values, sensors.clone(), detail)
            }
            SensorKind::Traffic => {
                let target_id = nearest(catalog, station_id, sensors)?;
                let target = grid(target_id);
                let others: Vec<&String> = sensors.iter().filter(|s| *s != target_id).collect();
                let cands: Vec<Vec<Option<f64>>> = others.iter().map(|s| grid(s)).collect();
                match impute_traffic(&target, raw.timestamps(), &cands, opts.traffic_corr_threshold) {
                    Ok(fill) => {
                        let detail = match &fill.method {
                            TrafficMethod::Unchanged => "complete".to_string(),
                            TrafficMethod::Rescaled {
                                candidate, correlation, ..
                            } => {
                                format!("rescaled from {} (r={correlation:.4})", others[*candidate])
                            }
                            TrafficMethod::SeasonalMean => "seasonal mean".to_string(),
                        };
                        (
                            fill.values.into_iter().map(Some).collect(),
                            vec![target_id.clone()],
                            detail,
                        )
                    }
                    Err(Error::Degenerate(_)) => (target, vec![target_id.clone()], "no observations".into()),
                    Err(e) => return Err(e),
                }
            }
            SensorKind::Air => {
                let sid = nearest(catalog, station_id, sensors)?;
                let series = readings.get(sid, param).unwrap_or(&[]);
                let first_day = start.date();
                let last_day = (start + Duration::hours(len as i64 - 1)).date();
                let n_days = (last_day - first_day).num_days() as usize + 1;
                let mut daily: Vec<Option<f64>> = vec![None; n_days];
                let mut seen = vec![0usize; n_days];
                for (t, v) in series {
                    let d = (t.date() - first_day).num_days();
                    if let (Some(v), true) = (v, d >= 0 && (d as usize) < n_days) {
                        let d = d as usize;
                        // Several readings on one day are averaged.
                        let prev = daily[d].unwrap_or(0.0) * seen[d] as f64;
                        seen[d] += 1;
                        daily[d] = Some((prev + v) / seen[d] as f64);
                    }
                }
                match fill_daily(&daily) {
                    Ok(hourly) => {
                        let offset = hours_since_midnight(start, first_day);
                        let cells = (0..len).map(|i| Some(hourly[offset + i])).collect();
                        (cells, vec![sid.clone()], "daily value repeated hourly".into())
                    }
                    Err(_) => (vec![None; len], vec![sid.clone()], "no observations".into()),
                }
            }
        };
        let missing_hours = cells.iter().filter(|c| c.is_none()).count();
        summary.parameters.push(ParameterFill {
            parameter: param.clone(),
            kind,
            sensors: used,
            detail,
            missing_hours,
        });
        columns.push(Column::from_options(param.clone(), FeatureKind::Continuous, &cells));
    }
    Ok((raw.with_columns(columns)?, summary))
}

fn hours_since_midnight(t: NaiveDateTime, day: NaiveDate) -> usize {
    (t - day.and_hms_opt(0, 0, 0).expect("midnight")).num_hours() as usize
}
