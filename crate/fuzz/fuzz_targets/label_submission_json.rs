#![no_main]

use al_lab_core::engine::LabelSubmission;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = LabelSubmission::from_json(text);
    }
});
