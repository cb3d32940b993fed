#![no_main]

use libfuzzer_sys::fuzz_target;
use occurlens::models::{Dataset, TrainedModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = TrainedModel::from_json(text) {
        // A model that validates must predict on any row of the right width.
        let names = model.meta.feature_names.clone();
        let row = vec![0.5; names.len()];
        let ds = Dataset::from_rows(names, &[row], vec![0]).expect("one-row dataset");
        let p = model.predict_proba(&ds).expect("validated model predicts");
        assert!(p[0].is_finite());
    }
});
