#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::data::{build_feature_table, parse_events, parse_readings};

const READINGS: &[u8] =
    b"timestamp,sensor_id,parameter,value\n2020-01-01T00:00:00,w1,temp,1\n2020-01-01T01:00:00,w1,temp,\n";

fuzz_target!(|data: &[u8]| {
    let Ok(events) = parse_events(data, "fuzz") else {
        return;
    };
    let readings = parse_readings(READINGS, "fixed").expect("fixed readings parse");
    let ids: Vec<String> = events.station_ids().map(str::to_string).collect();
    for id in ids {
        if let Ok(t) = build_feature_table(&readings, &events, &id) {
            let _ = t.stats();
        }
    }
});
