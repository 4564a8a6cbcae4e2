//! Replays the checked-in fuzz seeds through the same entry points the fuzz
//! targets exercise, so the corpus stays meaningful on a stable toolchain.

use std::fs;
use std::path::PathBuf;

use al_lab_core::data::{parse_csv, parse_metadata};
use al_lab_core::engine::{parse_reports_jsonl, reports_jsonl, LabelSubmission};
use al_lab_core::learner::Checkpoint;
use al_lab_core::{AlConfig, PredictionHistory};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.display().to_string(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn dataset_csv_seeds() {
    let results: Vec<bool> = seeds("dataset_csv").iter().map(|(_, b)| parse_csv(b, "seed").is_ok()).collect();
    assert!(results.contains(&true) && results.contains(&false), "{results:?}");
}

#[test]
fn dataset_metadata_seeds() {
    for (name, bytes) in seeds("dataset_metadata") {
        let _ = parse_metadata(text(&bytes)).map_err(|e| assert!(!e.to_string().is_empty(), "{name}"));
    }
}

#[test]
fn history_csv_seeds() {
    let mut parsed = 0;
    for (_, bytes) in seeds("history_csv") {
        let (&classes, rest) = bytes.split_first().unwrap();
        if let Ok(h) = PredictionHistory::from_csv(text(rest), classes as usize) {
            assert_eq!(PredictionHistory::from_csv(&h.to_csv(), classes as usize).unwrap().to_csv(), h.to_csv());
            parsed += 1;
        }
    }
    assert!(parsed > 0);
}

#[test]
fn al_config_seeds() {
    let ok: Vec<bool> = seeds("al_config_json").iter().map(|(_, b)| AlConfig::from_json(text(b)).is_ok()).collect();
    assert!(ok.contains(&true) && ok.contains(&false), "{ok:?}");
}

#[test]
fn checkpoint_seeds() {
    let mut loaded = 0;
    for (_, bytes) in seeds("checkpoint_json") {
        if let Ok(model) = Checkpoint::from_json(text(&bytes)).and_then(Checkpoint::into_model) {
            let p = model.predict_proba(&vec![0.5; model.config().input_dim()]).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            loaded += 1;
        }
    }
    assert_eq!(loaded, 1);
}

#[test]
fn label_submission_seeds() {
    let ok: Vec<bool> = seeds("label_submission_json").iter().map(|(_, b)| LabelSubmission::from_json(text(b)).is_ok()).collect();
    assert!(ok.contains(&true) && ok.contains(&false), "{ok:?}");
}

#[test]
fn reports_jsonl_seeds() {
    for (name, bytes) in seeds("reports_jsonl") {
        let reports = parse_reports_jsonl(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_reports_jsonl(&reports_jsonl(&reports)).unwrap(), reports);
    }
}
