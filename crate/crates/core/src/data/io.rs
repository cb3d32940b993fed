//! Readers for the hourly `readings.csv` and `events.csv` files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};

use super::{binarize_labels, Column, FeatureKind, FeatureTable};
use crate::{Error, Result};

const READINGS_HEADER: [&str; 4] = ["timestamp", "sensor_id", "parameter", "value"];
const EVENTS_HEADER: [&str; 3] = ["timestamp", "station_id", "count"];

/// Identifies one measured series: a parameter recorded by a sensor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeriesKey {
    pub sensor_id: String,
    pub parameter: String,
}

impl SeriesKey {
    pub fn column_name(&self) -> String {
        format!("{}:{}", self.sensor_id, self.parameter)
    }
}

/// Parsed sensor readings grouped per series, each in strictly increasing
/// time order. `None` marks a missing value.
#[derive(Debug, Clone, Default)]
pub struct Readings {
    series: BTreeMap<SeriesKey, Vec<(NaiveDateTime, Option<f64>)>>,
}

impl Readings {
    pub fn series(&self) -> &BTreeMap<SeriesKey, Vec<(NaiveDateTime, Option<f64>)>> {
        &self.series
    }

    pub fn get(&self, sensor_id: &str, parameter: &str) -> Option<&[(NaiveDateTime, Option<f64>)]> {
        self.series
            .get(&SeriesKey {
                sensor_id: sensor_id.to_string(),
                parameter: parameter.to_string(),
            })
            .map(Vec::as_slice)
    }

    /// Distinct parameter names, sorted.
    pub fn parameters(&self) -> Vec<String> {
        let mut p: Vec<String> = self.series.keys().map(|k| k.parameter.clone()).collect();
        p.sort();
        p.dedup();
        p
    }

    /// Sensors that recorded `parameter`, sorted.
    pub fn sensors_for(&self, parameter: &str) -> Vec<String> {
        self.series
            .keys()
            .filter(|k| k.parameter == parameter)
            .map(|k| k.sensor_id.clone())
            .collect()
    }

    pub fn time_range(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        let mut range: Option<(NaiveDateTime, NaiveDateTime)> = None;
        for s in self.series.values() {
            if let (Some(first), Some(last)) = (s.first(), s.last()) {
                range = Some(match range {
                    None => (first.0, last.0),
                    Some((lo, hi)) => (lo.min(first.0), hi.max(last.0)),
                });
            }
        }
        range
    }

    /// Projects one series onto the hourly grid `start + i h`, `i < len`.
    pub fn on_grid(&self, key: &SeriesKey, start: NaiveDateTime, len: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; len];
        if let Some(s) = self.series.get(key) {
            for (t, v) in s {
                if let Some(i) = grid_index(start, *t, len) {
                    out[i] = *v;
                }
            }
        }
        out
    }
}

/// Parsed per-station event counts, each in strictly increasing time order.
#[derive(Debug, Clone, Default)]
pub struct Events {
    stations: BTreeMap<String, Vec<(NaiveDateTime, i64)>>,
}

impl Events {
    pub fn station(&self, station_id: &str) -> Option<&[(NaiveDateTime, i64)]> {
        self.stations.get(station_id).map(Vec::as_slice)
    }

    pub fn station_ids(&self) -> impl Iterator<Item = &str> {
        self.stations.keys().map(String::as_str)
    }
}

pub(crate) fn grid_index(start: NaiveDateTime, t: NaiveDateTime, len: usize) -> Option<usize> {
    let h = (t - start).num_hours();
    (h >= 0 && (h as usize) < len).then_some(h as usize)
}

/// Parses an hour-resolution ISO-8601 timestamp (`2021-03-04T05`,
/// `2021-03-04T05:00` or `2021-03-04T05:00:00`; a space may replace `T`).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    let ts = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    .or_else(|| NaiveDateTime::parse_from_str(&format!("{s}:00"), "%Y-%m-%dT%H:%M").ok())?;
    (ts.minute() == 0 && ts.second() == 0 && ts.nanosecond() == 0).then_some(ts)
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:00:00").to_string()
}

fn check_header(headers: &csv::StringRecord, expected: &[&str], source: &str) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got.len() != expected.len() {
        return Err(Error::parse(
            source,
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    // The schema allows the timestamp column to carry a descriptive suffix.
    let ok = got[0].starts_with(expected[0]) && got[1..] == expected[1..];
    if !ok {
        return Err(Error::parse(
            source,
            1,
            format!("expected header {}", expected.join(",")),
        ));
    }
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn record_line(rec: &csv::StringRecord, fallback: u64) -> u64 {
    rec.position().map_or(fallback, |p| p.line())
}

/// Parses `timestamp,sensor_id,parameter,value` rows. An empty value cell
/// is a missing reading.
pub fn parse_readings<R: Read>(reader: R, source: &str) -> Result<Readings> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    check_header(&headers, &READINGS_HEADER, source)?;
    let mut series: BTreeMap<SeriesKey, Vec<(NaiveDateTime, Option<f64>)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let fallback = i as u64 + 2;
        let rec = rec.map_err(|e| Error::parse(source, fallback, e.to_string()))?;
        let line = record_line(&rec, fallback);
        if rec.len() != 4 {
            return Err(Error::parse(
                source,
                line,
                format!("expected 4 fields, found {}", rec.len()),
            ));
        }
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| Error::parse(source, line, format!("bad timestamp `{}`", &rec[0])))?;
        if rec[1].is_empty() || rec[2].is_empty() {
            return Err(Error::parse(source, line, "empty sensor or parameter"));
        }
        let value = match &rec[3] {
            "" => None,
            v => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::parse(source, line, format!("bad value `{v}`")))?;
                if !x.is_finite() {
                    return Err(Error::parse(source, line, format!("non-finite value `{v}`")));
                }
                Some(x)
            }
        };
        let key = SeriesKey {
            sensor_id: rec[1].to_string(),
            parameter: rec[2].to_string(),
        };
        let s = series.entry(key).or_default();
        if let Some((prev, _)) = s.last() {
            if ts <= *prev {
                return Err(Error::Schema(format!(
                    "{source}:{line}: timestamp {} not after {} for {}:{}",
                    format_timestamp(ts),
                    format_timestamp(*prev),
                    &rec[1],
                    &rec[2]
                )));
            }
        }
        s.push((ts, value));
    }
    Ok(Readings { series })
}

/// Parses `timestamp,station_id,count` rows.
pub fn parse_events<R: Read>(reader: R, source: &str) -> Result<Events> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    check_header(&headers, &EVENTS_HEADER, source)?;
    let mut stations: BTreeMap<String, Vec<(NaiveDateTime, i64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let fallback = i as u64 + 2;
        let rec = rec.map_err(|e| Error::parse(source, fallback, e.to_string()))?;
        let line = record_line(&rec, fallback);
        if rec.len() != 3 {
            return Err(Error::parse(
                source,
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| Error::parse(source, line, format!("bad timestamp `{}`", &rec[0])))?;
        if rec[1].is_empty() {
            return Err(Error::parse(source, line, "empty station id"));
        }
        let count: i64 = rec[2]
            .parse()
            .map_err(|_| Error::parse(source, line, format!("bad count `{}`", &rec[2])))?;
        if count < 0 {
            return Err(Error::parse(source, line, format!("negative count {count}")));
        }
        let s = stations.entry(rec[1].to_string()).or_default();
        if let Some((prev, _)) = s.last() {
            if ts <= *prev {
                return Err(Error::Schema(format!(
                    "{source}:{line}: timestamp {} not after {} for station {}",
                    format_timestamp(ts),
                    format_timestamp(*prev),
                    &rec[1]
                )));
            }
        }
        s.push((ts, count));
    }
    Ok(Events { stations })
}

pub fn read_readings(path: &Path) -> Result<Readings> {
    parse_readings(File::open(path)?, &path.display().to_string())
}

pub fn read_events(path: &Path) -> Result<Events> {
    parse_events(File::open(path)?, &path.display().to_string())
}

/// One row per hour over the span covered by the station's events and all
/// readings; one continuous column per `(sensor, parameter)` series named
/// `sensor:parameter`. Unobserved cells are missing; hours without an
/// event row count zero events.
pub fn build_feature_table(readings: &Readings, events: &Events, station_id: &str) -> Result<FeatureTable> {
    let ev = events.station(station_id).ok_or_else(|| Error::Lookup {
        kind: "station",
        id: station_id.to_string(),
    })?;
    let mut lo = ev.first().map(|e| e.0);
    let mut hi = ev.last().map(|e| e.0);
    if let Some((rlo, rhi)) = readings.time_range() {
        lo = Some(lo.map_or(rlo, |l| l.min(rlo)));
        hi = Some(hi.map_or(rhi, |h| h.max(rhi)));
    }
    let (Some(start), Some(end)) = (lo, hi) else {
        return Err(Error::Schema(format!("station `{station_id}` has no data")));
    };
    let len = (end - start).num_hours() as usize + 1;
    let timestamps: Vec<NaiveDateTime> = (0..len).map(|i| start + Duration::hours(i as i64)).collect();
    let mut counts = vec![0i64; len];
    for (t, c) in ev {
        if let Some(i) = grid_index(start, *t, len) {
            counts[i] = *c;
        }
    }
    let columns = readings
        .series()
        .keys()
        .map(|k| {
            Column::from_options(
                k.column_name(),
                FeatureKind::Continuous,
                &readings.on_grid(k, start, len),
            )
        })
        .collect();
    let labels = binarize_labels(&counts)?;
    FeatureTable::new(station_id, timestamps, columns, labels)?.with_counts(counts)
}

/// Reads both files and builds the station's raw (un-imputed) table.
pub fn load_feature_table(readings_path: &Path, events_path: &Path, station_id: &str) -> Result<FeatureTable> {
    let readings = read_readings(readings_path)?;
    let events = read_events(events_path)?;
    build_feature_table(&readings, &events, station_id)
}
