#![no_main]

use al_lab_core::learner::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(checkpoint) = Checkpoint::from_json(text) {
            if let Ok(model) = checkpoint.into_model() {
                let x = vec![0.5; model.config().input_dim()];
                let _ = model.predict_proba(&x);
            }
        }
    }
});
