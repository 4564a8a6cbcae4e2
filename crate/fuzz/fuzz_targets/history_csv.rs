#![no_main]

use al_lab_core::PredictionHistory;
use libfuzzer_sys::fuzz_target;

// First byte picks the class count; the rest is the CSV.
fuzz_target!(|data: &[u8]| {
    let Some((&classes, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(history) = PredictionHistory::from_csv(text, classes as usize) {
        let back = PredictionHistory::from_csv(&history.to_csv(), classes as usize).unwrap();
        assert_eq!(back.to_csv(), history.to_csv());
        if let Ok(scores) = history.dispersion() {
            assert!(scores.iter().all(|s| (0.0..=1.0).contains(&s.dispersion)));
        }
    }
});
