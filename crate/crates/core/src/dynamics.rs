//! Per-epoch prediction histories and label-dispersion.
//!
//! A sample's dispersion is the fraction of its recorded epoch predictions
//! that disagree with its most frequent (modal) prediction:
//! `1 - f / T`, where `f` counts predictions of the modal class and `T` is
//! the number of recorded epochs.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::{LearnerError, SnapshotHook};
use crate::ClassId;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no epochs recorded")]
    EmptyHistory,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Predicted class of every tracked sample at every recorded epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionHistory {
    sample_ids: Vec<usize>,
    class_count: usize,
    /// One row per epoch, one column per tracked sample.
    predictions: Vec<Vec<ClassId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionScore {
    pub sample_id: usize,
    pub modal_class: ClassId,
    pub modal_count: usize,
    pub dispersion: f64,
}

/// Most frequent class and its count; ties go to the lowest class id.
pub fn modal_class(sequence: &[ClassId], class_count: usize) -> Result<(ClassId, usize), DynamicsError> {
    if sequence.is_empty() {
        return Err(DynamicsError::InvalidInput("empty class sequence".into()));
    }
    let mut counts = vec![0usize; class_count];
    for &c in sequence {
        *counts.get_mut(c).ok_or_else(|| {
            DynamicsError::InvalidInput(format!("class {c} out of range for {class_count}"))
        })? += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate().skip(1) {
        if n > counts[best] {
            best = c;
        }
    }
    Ok((best, counts[best]))
}

impl PredictionHistory {
    pub fn new(sample_ids: Vec<usize>, class_count: usize) -> Self {
        Self {
            sample_ids,
            class_count,
            predictions: Vec::new(),
        }
    }

    pub fn sample_ids(&self) -> &[usize] {
        &self.sample_ids
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Number of recorded epochs `T`.
    pub fn epochs(&self) -> usize {
        self.predictions.len()
    }

    pub fn row(&self, epoch: usize) -> Option<&[ClassId]> {
        self.predictions.get(epoch).map(Vec::as_slice)
    }

    /// Prediction sequence of the sample in column `column`.
    pub fn sequence(&self, column: usize) -> Vec<ClassId> {
        self.predictions.iter().map(|row| row[column]).collect()
    }

    /// Appends the row for `epoch`, which must equal the current `T`.
    pub fn record_snapshot(&mut self, epoch: usize, preds: &[ClassId]) -> Result<(), DynamicsError> {
        if epoch != self.epochs() {
            return Err(DynamicsError::Contract(format!(
                "snapshot for epoch {epoch} but {} epochs recorded",
                self.epochs()
            )));
        }
        if preds.len() != self.sample_ids.len() {
            return Err(DynamicsError::Contract(format!(
                "snapshot has {} predictions for {} tracked samples",
                preds.len(),
                self.sample_ids.len()
            )));
        }
        if let Some(&c) = preds.iter().find(|&&c| c >= self.class_count) {
            return Err(DynamicsError::Contract(format!(
                "class {c} out of range for {}",
                self.class_count
            )));
        }
        self.predictions.push(preds.to_vec());
        Ok(())
    }

    /// One score per tracked sample, in `sample_ids` order.
    pub fn dispersion(&self) -> Result<Vec<DispersionScore>, DynamicsError> {
        let t = self.epochs();
        if t == 0 {
            return Err(DynamicsError::EmptyHistory);
        }
        let mut counts = vec![0usize; self.class_count];
        Ok(self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(col, &sample_id)| {
                counts.iter_mut().for_each(|c| *c = 0);
                for row in &self.predictions {
                    counts[row[col]] += 1;
                }
                let mut modal = 0;
                for (c, &n) in counts.iter().enumerate().skip(1) {
                    if n > counts[modal] {
                        modal = c;
                    }
                }
                let f = counts[modal];
                DispersionScore {
                    sample_id,
                    modal_class: modal,
                    modal_count: f,
                    dispersion: 1.0 - f as f64 / t as f64,
                }
            })
            .collect())
    }

    /// CSV `sample_id,epoch,predicted_class`, grouped by sample, epochs ascending.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,epoch,predicted_class\n");
        for (col, id) in self.sample_ids.iter().enumerate() {
            for (epoch, row) in self.predictions.iter().enumerate() {
                writeln!(out, "{id},{epoch},{}", row[col]).expect("write to String");
            }
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. Rows may come in any order but
    /// must cover every (sample, epoch) pair of a `0..T` grid exactly once.
    pub fn from_csv(text: &str, class_count: usize) -> Result<Self, DynamicsError> {
        let err = |line: usize, message: String| DynamicsError::Parse { line, message };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "sample_id,epoch,predicted_class" => {}
            _ => return Err(err(1, "expected header `sample_id,epoch,predicted_class`".into())),
        }
        let mut order: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut cells: HashMap<(usize, usize), ClassId> = HashMap::new();
        let mut max_epoch = None;
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(line_no, format!("expected 3 fields, found {}", fields.len())));
            }
            let parse = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|_| err(line_no, format!("{what} `{s}` is not a nonnegative integer")))
            };
            let (id, epoch, class) = (
                parse(fields[0], "sample_id")?,
                parse(fields[1], "epoch")?,
                parse(fields[2], "predicted_class")?,
            );
            if class >= class_count {
                return Err(err(line_no, format!("class {class} out of range for {class_count}")));
            }
            if seen.insert(id) {
                order.push(id);
            }
            if cells.insert((id, epoch), class).is_some() {
                return Err(err(line_no, format!("duplicate row for sample {id} epoch {epoch}")));
            }
            max_epoch = max_epoch.max(Some(epoch));
        }
        let epochs = max_epoch.map_or(0, |e| e + 1);
        if order.len().checked_mul(epochs) != Some(cells.len()) {
            return Err(err(
                0,
                format!(
                    "{} rows do not form a {}x{} grid",
                    cells.len(),
                    order.len(),
                    epochs
                ),
            ));
        }
        let mut history = Self::new(order, class_count);
        for epoch in 0..epochs {
            let row: Vec<ClassId> = history
                .sample_ids
                .iter()
                .map(|&id| cells.get(&(id, epoch)).copied())
                .collect::<Option<_>>()
                .ok_or_else(|| err(0, format!("epoch {epoch} is incomplete")))?;
            history.predictions.push(row);
        }
        Ok(history)
    }
}

impl SnapshotHook for PredictionHistory {
    fn on_epoch(&mut self, epoch: usize, predictions: &[ClassId]) -> Result<(), LearnerError> {
        self.record_snapshot(epoch, predictions)
            .map_err(|e| LearnerError::Snapshot(Box::new(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn history_of(seqs: &[Vec<ClassId>], class_count: usize) -> PredictionHistory {
        let mut h = PredictionHistory::new((0..seqs.len()).collect(), class_count);
        for t in 0..seqs[0].len() {
            let row: Vec<ClassId> = seqs.iter().map(|s| s[t]).collect();
            h.record_snapshot(t, &row).unwrap();
        }
        h
    }

    #[test]
    fn snapshot_bookkeeping() {
        let mut h = PredictionHistory::new(vec![4, 9], 3);
        h.record_snapshot(0, &[0, 2]).unwrap();
        assert_eq!(h.epochs(), 1);
        h.record_snapshot(1, &[1, 2]).unwrap();
        assert!(matches!(h.record_snapshot(3, &[0, 0]), Err(DynamicsError::Contract(_))));
        assert!(matches!(h.record_snapshot(2, &[0]), Err(DynamicsError::Contract(_))));
        assert!(matches!(h.record_snapshot(2, &[0, 3]), Err(DynamicsError::Contract(_))));
        assert_eq!(h.epochs(), 2);
    }

    #[test]
    fn hundred_snapshots_fill_the_matrix() {
        let mut h = PredictionHistory::new((0..7).collect(), 2);
        for t in 0..100 {
            h.record_snapshot(t, &[t % 2; 7]).unwrap();
        }
        assert_eq!(h.epochs(), 100);
        assert!((0..100).all(|t| h.row(t).unwrap().len() == 7));
    }

    #[test]
    fn modal_class_examples() {
        assert_eq!(modal_class(&[1, 1, 1, 1], 2).unwrap(), (1, 4));
        assert_eq!(modal_class(&[2, 0, 1, 1, 0, 1, 1, 2], 3).unwrap(), (1, 4));
        assert_eq!(modal_class(&[0, 1], 2).unwrap(), (0, 1));
        assert!(modal_class(&[], 2).is_err());
        assert!(modal_class(&[3], 2).is_err());
    }

    #[test]
    fn dispersion_examples() {
        let mut car = vec![3; 100];
        car[42] = 5;
        let h = history_of(&[car, vec![2; 100]], 10);
        let d = h.dispersion().unwrap();
        assert!((d[0].dispersion - 0.01).abs() < 1e-12);
        assert_eq!((d[0].modal_class, d[0].modal_count), (3, 99));
        assert_eq!(d[1].dispersion, 0.0);

        let h = history_of(&[vec![2, 0, 1, 1, 0, 1, 1, 2]], 3);
        assert_eq!(h.dispersion().unwrap()[0].dispersion, 0.5);

        let empty = PredictionHistory::new(vec![1], 2);
        assert_eq!(empty.dispersion(), Err(DynamicsError::EmptyHistory));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let h = history_of(&[vec![0, 1, 1], vec![2, 2, 0]], 3);
        let csv = h.to_csv();
        assert!(csv.starts_with("sample_id,epoch,predicted_class\n0,0,0\n0,1,1\n"));
        assert_eq!(PredictionHistory::from_csv(&csv, 3).unwrap(), h);
        assert!(PredictionHistory::from_csv(&csv, 2).is_err());
        assert!(PredictionHistory::from_csv("sample_id,epoch,predicted_class\n0,0,0\n0,2,0\n", 2).is_err());
        assert!(PredictionHistory::from_csv("id,epoch\n", 2).is_err());
        assert!(PredictionHistory::from_csv("sample_id,epoch,predicted_class\n0,0,0\n0,0,1\n", 2).is_err());
    }

    fn histories() -> impl Strategy<Value = (usize, Vec<ClassId>)> {
        (1usize..=10).prop_flat_map(|c| (Just(c), prop::collection::vec(0..c, 1..=50)))
    }

    proptest! {
        #[test]
        fn dispersion_range_and_bounds((c, seq) in histories()) {
            let t = seq.len();
            let d = &history_of(std::slice::from_ref(&seq), c).dispersion().unwrap()[0];
            prop_assert!(d.dispersion >= 0.0);
            prop_assert!(d.dispersion <= 1.0 - 1.0 / t as f64 + 1e-15);
            prop_assert!(d.modal_count >= t.div_ceil(c));
            prop_assert_eq!(d.dispersion == 0.0, seq.iter().all(|&x| x == seq[0]));
            prop_assert_eq!(d.dispersion, 1.0 - d.modal_count as f64 / t as f64);
        }

        #[test]
        fn dispersion_ignores_epoch_order((c, seq) in histories(), rot in 0usize..50) {
            let mut shuffled = seq.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            let a = &history_of(&[seq], c).dispersion().unwrap()[0];
            let b = &history_of(&[shuffled], c).dispersion().unwrap()[0];
            prop_assert_eq!(a.dispersion, b.dispersion);
            prop_assert_eq!(a.modal_count, b.modal_count);
        }

        #[test]
        fn dilution_monotonicity((c, seq) in histories(), extra in 0usize..10) {
            let before = &history_of(std::slice::from_ref(&seq), c).dispersion().unwrap()[0];
            let mut more = seq.clone();
            more.push(before.modal_class);
            let after = &history_of(&[more], c).dispersion().unwrap()[0];
            prop_assert!(after.dispersion <= before.dispersion);

            let other = extra % c;
            let mut more = seq;
            more.push(other);
            let after = &history_of(&[more], c).dispersion().unwrap()[0];
            prop_assert!(after.modal_count >= before.modal_count);
        }
    }
}
