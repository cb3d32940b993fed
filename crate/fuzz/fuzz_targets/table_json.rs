#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::data::FeatureTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = serde_json::from_slice::<FeatureTable>(data) {
        let _ = t.stats();
        let _ = t.with_time_features();
        let _ = serde_json::to_vec(&t).expect("valid table serializes");
    }
});
