#![no_main]

use al_lab_core::engine::{aggregate, parse_reports_jsonl, reports_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(reports) = parse_reports_jsonl(text) {
            let back = parse_reports_jsonl(&reports_jsonl(&reports)).unwrap();
            assert_eq!(aggregate(&back).len(), aggregate(&reports).len());
        }
    }
});
