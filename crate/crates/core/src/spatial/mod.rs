//! Station/sensor geometry, nearest-station assignment and the imputation
//! rules for weather, traffic and daily air-quality series.

mod assemble;
mod catalog;
mod daily;
mod idw;
mod traffic;

pub use assemble::{assemble_station, ImputeOptions, ImputeSummary, ParameterFill};
pub use catalog::{
    assign_nearest, load_catalog, parse_sensors, parse_stations, parse_travel_times, DistanceMetric, Point, Sensor,
    SensorKind, Station, StationCatalog, TravelTimes,
};
pub use daily::fill_daily;
pub use idw::{idw_weights, impute_weighted, IdwExponent, WeightedSeries};
pub use traffic::{impute_traffic, TrafficFill, TrafficMethod, DEFAULT_CORR_THRESHOLD};
