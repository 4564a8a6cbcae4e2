#![no_main]

use al_lab_core::data::{parse_csv, LabelAccess};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_csv(data, "fuzz") {
        assert!(ds.dims() > 0);
        let split = ds.split();
        assert_eq!(split.train.len() + split.test.len(), ds.len());
        for &i in &split.test {
            assert!(ds.label(i, LabelAccess::Evaluation).unwrap() < ds.class_count());
        }
        let _ = ds.normalize();
    }
});
