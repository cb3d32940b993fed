#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::spatial::parse_travel_times;

fuzz_target!(|data: &[u8]| {
    if let Ok(tt) = parse_travel_times(data, "fuzz") {
        let _ = tt.get("A", "p1");
    }
});
