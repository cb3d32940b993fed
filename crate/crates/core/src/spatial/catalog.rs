use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Weather,
    Traffic,
    Air,
}

impl std::str::FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "weather" => Ok(SensorKind::Weather),
            "traffic" => Ok(SensorKind::Traffic),
            "air" => Ok(SensorKind::Air),
            other => Err(format!("unknown sensor kind `{other}`")),
        }
    }
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Weather => "weather",
            SensorKind::Traffic => "traffic",
            SensorKind::Air => "air",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    pub kind: SensorKind,
    pub x: f64,
    pub y: f64,
}

/// Travel time in seconds from a station to a point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TravelTimes {
    seconds: BTreeMap<(String, String), f64>,
}

impl TravelTimes {
    pub fn get(&self, station_id: &str, point_id: &str) -> Option<f64> {
        self.seconds
            .get(&(station_id.to_string(), point_id.to_string()))
            .copied()
    }

    pub fn insert(&mut self, station_id: &str, point_id: &str, seconds: f64) -> Result<()> {
        if !(seconds.is_finite() && seconds >= 0.0) {
            return Err(Error::Parameter(format!(
                "travel time {seconds} for ({station_id}, {point_id}) must be finite and nonnegative"
            )));
        }
        self.seconds
            .insert((station_id.to_string(), point_id.to_string()), seconds);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.seconds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seconds.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct StationCatalog {
    stations: Vec<Station>,
    sensors: Vec<Sensor>,
    travel_times: Option<TravelTimes>,
}

impl StationCatalog {
    pub fn new(stations: Vec<Station>, sensors: Vec<Sensor>, travel_times: Option<TravelTimes>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &stations {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Schema(format!("duplicate station id `{}`", s.id)));
            }
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::Schema(format!("station `{}` has non-finite coordinates", s.id)));
            }
        }
        let mut seen = HashSet::new();
        for s in &sensors {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Schema(format!("duplicate sensor id `{}`", s.id)));
            }
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::Schema(format!("sensor `{}` has non-finite coordinates", s.id)));
            }
        }
        Ok(StationCatalog {
            stations,
            sensors,
            travel_times,
        })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn travel_times(&self) -> Option<&TravelTimes> {
        self.travel_times.as_ref()
    }

    pub fn station(&self, id: &str) -> Result<&Station> {
        self.stations.iter().find(|s| s.id == id).ok_or_else(|| Error::Lookup {
            kind: "station",
            id: id.to_string(),
        })
    }

    pub fn sensor(&self, id: &str) -> Result<&Sensor> {
        self.sensors.iter().find(|s| s.id == id).ok_or_else(|| Error::Lookup {
            kind: "sensor",
            id: id.to_string(),
        })
    }
}

/// A location to assign: an event or a sensor. `id` keys the travel-time
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Euclidean,
    TravelTime,
}

// Relative slack under which two distances count as tied.
const TIE_EPS: f64 = 1e-12;

/// The closest station under `metric`; ties go to the smallest station id.
pub fn assign_nearest(point: &Point, catalog: &StationCatalog, metric: DistanceMetric) -> Result<String> {
    if catalog.stations.is_empty() {
        return Err(Error::Parameter("catalog has no stations".into()));
    }
    let travel = match metric {
        DistanceMetric::TravelTime => Some(
            catalog
                .travel_times
                .as_ref()
                .ok_or_else(|| Error::Parameter("travel-time metric needs a travel-time matrix".into()))?,
        ),
        DistanceMetric::Euclidean => None,
    };
    let mut best: Option<(f64, &str)> = None;
    for s in &catalog.stations {
        let d = match travel {
            Some(tt) => match tt.get(&s.id, &point.id) {
                Some(d) => d,
                None => continue,
            },
            None => (s.x - point.x).hypot(s.y - point.y),
        };
        best = match best {
            None => Some((d, &s.id)),
            Some((bd, bid)) => {
                let tie = (d - bd).abs() <= TIE_EPS * d.max(bd);
                if (tie && s.id.as_str() < bid) || (!tie && d < bd) {
                    Some((d, &s.id))
                } else {
                    Some((bd, bid))
                }
            }
        };
    }
    best.map(|(_, id)| id.to_string())
        .ok_or_else(|| Error::Unreachable(point.id.clone()))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

fn records<R: Read>(r: R, header: &[&str], source: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = reader(r);
    let got = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::parse(source, 1, format!("expected header {}", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let fallback = i as u64 + 2;
        let rec = rec.map_err(|e| Error::parse(source, fallback, e.to_string()))?;
        let line = rec.position().map_or(fallback, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::parse(
                source,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        if rec.iter().next().is_some_and(str::is_empty) {
            return Err(Error::parse(source, line, "empty id"));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn coord(s: &str, source: &str, line: u64) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(source, line, format!("bad coordinate `{s}`")))
}

/// `station_id,name,x_m,y_m`
pub fn parse_stations<R: Read>(r: R, source: &str) -> Result<Vec<Station>> {
    records(r, &["station_id", "name", "x_m", "y_m"], source)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(Station {
                id: rec[0].to_string(),
                name: rec[1].to_string(),
                x: coord(&rec[2], source, line)?,
                y: coord(&rec[3], source, line)?,
            })
        })
        .collect()
}

/// `sensor_id,kind,x_m,y_m`
pub fn parse_sensors<R: Read>(r: R, source: &str) -> Result<Vec<Sensor>> {
    records(r, &["sensor_id", "kind", "x_m", "y_m"], source)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(Sensor {
                id: rec[0].to_string(),
                kind: rec[1].parse().map_err(|e: String| Error::parse(source, line, e))?,
                x: coord(&rec[2], source, line)?,
                y: coord(&rec[3], source, line)?,
            })
        })
        .collect()
}

/// `station_id,point_id,seconds`
pub fn parse_travel_times<R: Read>(r: R, source: &str) -> Result<TravelTimes> {
    let mut tt = TravelTimes::default();
    for (line, rec) in records(r, &["station_id", "point_id", "seconds"], source)? {
        let secs = coord(&rec[2], source, line)?;
        tt.insert(&rec[0], &rec[1], secs)
            .map_err(|e| Error::parse(source, line, e.to_string()))?;
    }
    Ok(tt)
}

pub fn load_catalog(stations: &Path, sensors: &Path, travel_times: Option<&Path>) -> Result<StationCatalog> {
    let st = parse_stations(File::open(stations)?, &stations.display().to_string())?;
    let se = parse_sensors(File::open(sensors)?, &sensors.display().to_string())?;
    let tt = match travel_times {
        Some(p) => Some(parse_travel_times(File::open(p)?, &p.display().to_string())?),
        None => None,
    };
    StationCatalog::new(st, se, tt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn station(id: &str, x: f64, y: f64) -> Station {
        Station {
            id: id.into(),
            name: id.into(),
            x,
            y,
        }
    }

    fn pt(x: f64, y: f64) -> Point {
        Point { id: "p".into(), x, y }
    }

    #[test]
    fn coincident_point() {
        let c = StationCatalog::new(
            vec![station("1", 0.0, 0.0), station("3", 5.0, 5.0), station("2", 9.0, 1.0)],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(
            assign_nearest(&pt(5.0, 5.0), &c, DistanceMetric::Euclidean).unwrap(),
            "3"
        );
    }

    #[test]
    fn tie_goes_to_smallest_id() {
        let c = StationCatalog::new(vec![station("5", 2.0, 0.0), station("2", -2.0, 0.0)], vec![], None).unwrap();
        assert_eq!(
            assign_nearest(&pt(0.0, 0.0), &c, DistanceMetric::Euclidean).unwrap(),
            "2"
        );
    }

    #[test]
    fn brute_force_argmin() {
        let c = StationCatalog::new(
            vec![station("a", 10.0, 0.0), station("b", 0.0, 4.0), station("c", -7.0, 0.0)],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(
            assign_nearest(&pt(0.0, 0.0), &c, DistanceMetric::Euclidean).unwrap(),
            "b"
        );
    }

    #[test]
    fn travel_time_metric() {
        let mut tt = TravelTimes::default();
        tt.insert("a", "e1", 300.0).unwrap();
        tt.insert("b", "e1", 120.0).unwrap();
        let c = StationCatalog::new(vec![station("a", 0.0, 0.0), station("b", 100.0, 0.0)], vec![], Some(tt)).unwrap();
        let p = Point {
            id: "e1".into(),
            x: 0.0,
            y: 0.0,
        };
        assert_eq!(assign_nearest(&p, &c, DistanceMetric::TravelTime).unwrap(), "b");
        let lost = Point {
            id: "e2".into(),
            x: 0.0,
            y: 0.0,
        };
        assert!(matches!(
            assign_nearest(&lost, &c, DistanceMetric::TravelTime),
            Err(Error::Unreachable(_))
        ));
        let no_matrix = StationCatalog::new(vec![station("a", 0.0, 0.0)], vec![], None).unwrap();
        assert!(assign_nearest(&p, &no_matrix, DistanceMetric::TravelTime).is_err());
    }

    #[test]
    fn catalog_validation() {
        assert!(StationCatalog::new(vec![station("a", 0.0, 0.0), station("a", 1.0, 0.0)], vec![], None).is_err());
        assert!(StationCatalog::new(vec![station("a", f64::NAN, 0.0)], vec![], None).is_err());
        let mut tt = TravelTimes::default();
        assert!(tt.insert("a", "p", -1.0).is_err());
    }

    #[test]
    fn parses_catalog_files() {
        let st = parse_stations("station_id,name,x_m,y_m\nS1,Morges,10,20\n".as_bytes(), "stations").unwrap();
        assert_eq!(st[0].name, "Morges");
        let se = parse_sensors("sensor_id,kind,x_m,y_m\nT1,traffic,0,0\n".as_bytes(), "sensors").unwrap();
        assert_eq!(se[0].kind, SensorKind::Traffic);
        let err = parse_sensors("sensor_id,kind,x_m,y_m\nT1,boat,0,0\n".as_bytes(), "sensors");
        assert!(matches!(err, Err(Error::Parse { line: 2, .. })));
        let tt = parse_travel_times("station_id,point_id,seconds\nS1,e,60\n".as_bytes(), "tt").unwrap();
        assert_eq!(tt.get("S1", "e"), Some(60.0));
    }

    proptest! {
        #[test]
        fn scale_invariant(
            coords in prop::collection::vec((-1000i32..1000, -1000i32..1000), 1..8),
            p in (-1000i32..1000, -1000i32..1000),
            scale in 1e-3f64..1e3,
        ) {
            let stations: Vec<Station> = coords.iter().enumerate()
                .map(|(i, &(x, y))| station(&format!("s{i:02}"), f64::from(x), f64::from(y)))
                .collect();
            let scaled: Vec<Station> = stations.iter()
                .map(|s| station(&s.id, s.x * scale, s.y * scale)).collect();
            let c1 = StationCatalog::new(stations, vec![], None).unwrap();
            let c2 = StationCatalog::new(scaled, vec![], None).unwrap();
            let a = assign_nearest(&pt(f64::from(p.0), f64::from(p.1)), &c1, DistanceMetric::Euclidean).unwrap();
            let b = assign_nearest(&pt(f64::from(p.0) * scale, f64::from(p.1) * scale), &c2, DistanceMetric::Euclidean).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
