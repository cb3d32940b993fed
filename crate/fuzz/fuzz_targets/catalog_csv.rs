#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::spatial::{parse_sensors, parse_stations, StationCatalog};

// The first byte picks which file the rest is parsed as; the other file is fixed.
fuzz_target!(|data: &[u8]| {
    let Some((&which, body)) = data.split_first() else {
        return;
    };
    let stations = b"station_id,name,x_m,y_m\nA,a,0,0\n".as_slice();
    let sensors = b"sensor_id,kind,x_m,y_m\nw1,weather,10,0\n".as_slice();
    let (st, se) = if which & 1 == 0 {
        (body, sensors)
    } else {
        (stations, body)
    };
    if let (Ok(st), Ok(se)) = (parse_stations(st, "stations"), parse_sensors(se, "sensors")) {
        let _ = StationCatalog::new(st, se, None);
    }
});
