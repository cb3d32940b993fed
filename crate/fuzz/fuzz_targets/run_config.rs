#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::pipeline::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        // The canonical form of a valid config must load back to itself.
        let again = RunConfig::from_json(&cfg.canonical_json()).expect("canonical config reloads");
        assert_eq!(again.sha256(), cfg.sha256());
    }
});
