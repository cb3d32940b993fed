//! Synthetic stations with a known hourly event profile, for end-to-end
//! checks against exact oracles.
//!
//! Labels are Bernoulli draws with an hour-of-day probability `λ(h)`.
//! Covariates come in four families: one tied to `λ` (road-like), pure
//! noise, a slowly varying AR(1) series (weather-like) and a value drawn
//! once per day (air-like). Each label stream and covariate uses its own
//! seeded random stream, so adding a covariate leaves the others unchanged.

use std::fmt::Write as _;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{format_timestamp, Column, FeatureKind, FeatureTable};
use crate::spatial::SensorKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateKind {
    /// `coupling * λ(hour) + N(0, noise)`.
    DiurnalCorrelated { coupling: f64, noise: f64 },
    /// Independent standard normal draws.
    IidNoise,
    /// Stationary `x[t] = rho * x[t-1] + N(0, sigma)`.
    Ar1 { rho: f64, sigma: f64 },
    /// One standard normal draw per calendar day.
    DailyConstant,
}

impl CovariateKind {
    /// Sensor family used when the covariate is written out as readings.
    pub fn sensor_kind(&self) -> SensorKind {
        match self {
            CovariateKind::DiurnalCorrelated { .. } => SensorKind::Traffic,
            CovariateKind::IidNoise | CovariateKind::Ar1 { .. } => SensorKind::Weather,
            CovariateKind::DailyConstant => SensorKind::Air,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

impl CovariateSpec {
    pub fn new(name: impl Into<String>, kind: CovariateKind) -> Self {
        CovariateSpec {
            name: name.into(),
            kind,
        }
    }
}

fn default_station() -> String {
    "S1".into()
}

fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2015, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_station")]
    pub station_id: String,
    #[serde(default = "default_start")]
    pub start: NaiveDateTime,
    pub n_hours: usize,
    /// Event probability for each hour of day, 24 entries.
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
}

/// `0.05 + 0.25 * max(0, sin(π (h - 6) / 12))`: quiet nights, a daytime bump.
pub fn diurnal_profile() -> Vec<f64> {
    (0..24)
        .map(|h| 0.05 + 0.25 * (std::f64::consts::PI * (h as f64 - 6.0) / 12.0).sin().max(0.0))
        .collect()
}

impl Scenario {
    /// Six 365-day years of the diurnal profile with one road-like, five
    /// noise, one AR(1) and one daily covariate.
    pub fn default_diurnal() -> Self {
        let mut covariates = vec![CovariateSpec::new(
            "road",
            CovariateKind::DiurnalCorrelated {
                coupling: 1.0,
                noise: 0.05,
            },
        )];
        covariates.extend((1..=5).map(|k| CovariateSpec::new(format!("noise{k}"), CovariateKind::IidNoise)));
        covariates.push(CovariateSpec::new(
            "weather",
            CovariateKind::Ar1 { rho: 0.9, sigma: 1.0 },
        ));
        covariates.push(CovariateSpec::new("air", CovariateKind::DailyConstant));
        Scenario {
            station_id: default_station(),
            start: default_start(),
            n_hours: 52_560,
            lambda: diurnal_profile(),
            covariates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.len() != 24 {
            return Err(Error::Parameter(format!(
                "λ profile needs 24 entries, got {}",
                self.lambda.len()
            )));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Parameter(format!("λ value {l} outside [0, 1]")));
        }
        if self.n_hours == 0 {
            return Err(Error::Parameter("scenario needs at least one hour".into()));
        }
        if self.start.minute() != 0 || self.start.second() != 0 {
            return Err(Error::Parameter("scenario start must be on the hour".into()));
        }
        for (i, c) in self.covariates.iter().enumerate() {
            if c.name.is_empty() || self.covariates[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Parameter(format!(
                    "covariate name `{}` is empty or repeated",
                    c.name
                )));
            }
            let ok = match c.kind {
                CovariateKind::DiurnalCorrelated { coupling, noise } => {
                    coupling.is_finite() && noise >= 0.0 && noise.is_finite()
                }
                CovariateKind::Ar1 { rho, sigma } => rho.abs() < 1.0 && sigma >= 0.0 && sigma.is_finite(),
                CovariateKind::IidNoise | CovariateKind::DailyConstant => true,
            };
            if !ok {
                return Err(Error::Parameter(format!(
                    "invalid parameters for covariate `{}`",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        (0..self.n_hours)
            .map(|i| self.start + Duration::hours(i as i64))
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative sd")
}

/// Draws labels and covariates. The table has one continuous column per
/// covariate (in scenario order) and no calendar columns.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<FeatureTable> {
    scenario.validate()?;
    let ts = scenario.timestamps();
    let hours: Vec<usize> = ts.iter().map(|t| t.hour() as usize).collect();
    let mut rng = stream(seed, 0);
    let labels: Vec<u8> = hours
        .iter()
        .map(|&h| u8::from(rng.random::<f64>() < scenario.lambda[h]))
        .collect();
    let first_day = scenario.start.date();
    let columns = scenario
        .covariates
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let mut rng = stream(seed, k as u64 + 1);
            let values: Vec<f64> = match spec.kind {
                CovariateKind::DiurnalCorrelated { coupling, noise } => {
                    let eps = normal(noise);
                    hours
                        .iter()
                        .map(|&h| coupling * scenario.lambda[h] + eps.sample(&mut rng))
                        .collect()
                }
                CovariateKind::IidNoise => {
                    let z = normal(1.0);
                    (0..ts.len()).map(|_| z.sample(&mut rng)).collect()
                }
                CovariateKind::Ar1 { rho, sigma } => {
                    let eps = normal(sigma);
                    let mut x = normal(sigma / (1.0 - rho * rho).sqrt()).sample(&mut rng);
                    (0..ts.len())
                        .map(|i| {
                            if i > 0 {
                                x = rho * x + eps.sample(&mut rng);
                            }
                            x
                        })
                        .collect()
                }
                CovariateKind::DailyConstant => {
                    let z = normal(1.0);
                    let n_days = (ts[ts.len() - 1].date() - first_day).num_days() as usize + 1;
                    let daily: Vec<f64> = (0..n_days).map(|_| z.sample(&mut rng)).collect();
                    ts.iter()
                        .map(|t| daily[(t.date() - first_day).num_days() as usize])
                        .collect()
                }
            };
            Column::dense(spec.name.clone(), FeatureKind::Continuous, values)
        })
        .collect();
    let counts = labels.iter().map(|&l| i64::from(l)).collect();
    FeatureTable::new(scenario.station_id.clone(), ts, columns, labels)?.with_counts(counts)
}

/// AUC of the ideal scorer `s(h) = λ(h)` when every hour of day is equally
/// frequent, computed exactly over all (positive hour, negative hour)
/// pairs. Returns exactly 0.5 for a flat profile or when either class has
/// zero probability.
pub fn bayes_auc(lambda: &[f64]) -> Result<f64> {
    if lambda.is_empty() || lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Parameter("λ values must lie in [0, 1]".into()));
    }
    let pos_total: f64 = lambda.iter().sum();
    let neg_total: f64 = lambda.iter().map(|l| 1.0 - l).sum();
    if pos_total == 0.0 || neg_total == 0.0 || lambda.iter().all(|&l| l == lambda[0]) {
        return Ok(0.5);
    }
    let mut credit = 0.0;
    for &lp in lambda {
        for &ln in lambda {
            let w = lp * (1.0 - ln);
            if lp > ln {
                credit += w;
            } else if lp == ln {
                credit += 0.5 * w;
            }
        }
    }
    Ok(credit / (pos_total * neg_total))
}

/// A generated station written in the ingestion file formats.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFiles {
    pub readings: String,
    pub events: String,
    pub stations: String,
    pub sensors: String,
}

/// Serializes a [`generate`]d table: one sensor per covariate placed along
/// the x axis, hourly readings except for daily covariates (one reading at
/// midnight), and an event count for every hour.
pub fn write_scenario_files(scenario: &Scenario, table: &FeatureTable) -> Result<ScenarioFiles> {
    let mut stations = String::from("station_id,name,x_m,y_m\n");
    writeln!(stations, "{},synthetic station,0,0", table.station_id()).expect("string write");
    let mut sensors = String::from("sensor_id,kind,x_m,y_m\n");
    let mut readings = String::from("timestamp,sensor_id,parameter,value\n");
    let stamps: Vec<String> = table.timestamps().iter().map(|t| format_timestamp(*t)).collect();
    for (k, spec) in scenario.covariates.iter().enumerate() {
        let col = table
            .column(&spec.name)
            .ok_or_else(|| Error::Schema(format!("table lacks covariate `{}`", spec.name)))?;
        let kind = spec.kind.sensor_kind();
        let sensor = format!("{}-{}", kind.as_str(), spec.name);
        writeln!(sensors, "{sensor},{},{},0", kind.as_str(), 100 * (k + 1)).expect("string write");
        for (i, v) in col.iter().enumerate() {
            let t = table.timestamps()[i];
            if kind == SensorKind::Air && t.hour() != 0 && i != 0 {
                continue;
            }
            match v {
                Some(v) => writeln!(readings, "{},{sensor},{},{v}", stamps[i], spec.name),
                None => writeln!(readings, "{},{sensor},{},", stamps[i], spec.name),
            }
            .expect("string write");
        }
    }
    let mut events = String::from("timestamp,station_id,count\n");
    let counts: Vec<i64> = match table.counts() {
        Some(c) => c.to_vec(),
        None => table.labels().iter().map(|&l| i64::from(l)).collect(),
    };
    for (s, c) in stamps.iter().zip(counts) {
        writeln!(events, "{s},{},{c}", table.station_id()).expect("string write");
    }
    Ok(ScenarioFiles {
        readings,
        events,
        stations,
        sensors,
    })
}
