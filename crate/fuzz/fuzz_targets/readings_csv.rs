#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::data::parse_readings;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = parse_readings(data, "fuzz") {
        // Anything accepted must also be usable downstream.
        let _ = r.time_range();
        let _ = r.parameters();
    }
});
