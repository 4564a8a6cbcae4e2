#![no_main]

use al_lab_core::AlConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = AlConfig::from_json(text) {
            let again = AlConfig::from_json(&serde_json::to_string(&config).unwrap()).unwrap();
            assert_eq!(again, config);
        }
    }
});

