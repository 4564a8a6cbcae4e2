use serde::{Deserialize, Serialize};

use super::{BlobParams, DataError, Matrix};
use crate::ClassId;

/// Grant of ground-truth access to training-split labels.
///
/// Only the simulated annotator, the oracle baseline and ground-truth
/// analyses should hold one. Everything else reads labels through
/// [`LabelAccess::Evaluation`], which is limited to the test split.
#[derive(Debug)]
pub struct OracleToken {
    _private: (),
}

impl OracleToken {
    /// Explicitly grant ground-truth access. Call sites are the audit trail.
    pub fn ground_truth() -> Self {
        Self { _private: () }
    }
}

/// How a caller is reading a label.
#[derive(Clone, Copy, Debug)]
pub enum LabelAccess<'a> {
    /// Held-out evaluation: test-split indices only.
    Evaluation,
    /// Ground truth for any index.
    Oracle(&'a OracleToken),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded split with `floor(test_fraction * n)` test samples; both lists sorted.
    pub fn seeded(n: usize, test_fraction: f64, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut crate::seed::rng_from_seed(seed));
        let n_test = (test_fraction * n as f64 + 1e-9).floor() as usize;
        let mut test = order[..n_test].to_vec();
        let mut train = order[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Self { train, test }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), DataError> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n {
                return Err(DataError::IndexOutOfRange { index: i, len: n });
            }
            if seen[i] {
                return Err(DataError::Metadata(format!(
                    "sample {i} appears twice in the split"
                )));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::Metadata(format!(
                "sample {missing} belongs to neither split"
            )));
        }
        Ok(())
    }
}

/// Per-feature standardization statistics fitted on the train split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Blobs(BlobParams),
    Csv { sha256: String },
}

/// Features, gated labels, class count and a train/test split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    features: Matrix,
    labels: Vec<ClassId>,
    class_count: usize,
    split: Split,
    is_test: Vec<bool>,
    normalization: Option<Normalization>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<ClassId>,
        class_count: usize,
        split: Split,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        let n = features.rows();
        if labels.len() != n {
            return Err(DataError::Shape(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(DataError::InvalidParameter("class count must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(DataError::InvalidParameter(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidParameter("features must be finite".into()));
        }
        split.validate(n)?;
        let mut is_test = vec![false; n];
        for &i in &split.test {
            is_test[i] = true;
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            class_count,
            split,
            is_test,
            normalization: None,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &[f64] {
        self.features.row(index)
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_test(&self, index: usize) -> bool {
        self.is_test.get(index).copied().unwrap_or(false)
    }

    /// Reads one label under the given access mode.
    pub fn label(&self, index: usize, access: LabelAccess<'_>) -> Result<ClassId, DataError> {
        let len = self.len();
        let &label = self
            .labels
            .get(index)
            .ok_or(DataError::IndexOutOfRange { index, len })?;
        match access {
            LabelAccess::Oracle(_) => Ok(label),
            LabelAccess::Evaluation if self.is_test[index] => Ok(label),
            LabelAccess::Evaluation => Err(DataError::GatedLabel(index)),
        }
    }

    /// Ground truth for `index`; panics if out of range.
    pub fn reveal(&self, index: usize, _token: &OracleToken) -> ClassId {
        self.labels[index]
    }

    /// `(index, label)` for every test-split sample.
    pub fn test_set(&self) -> impl Iterator<Item = (usize, ClassId)> + '_ {
        self.split.test.iter().map(move |&i| (i, self.labels[i]))
    }

    pub(crate) fn all_labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub(crate) fn set_normalization(&mut self, normalization: Option<Normalization>) {
        self.normalization = normalization;
    }

    /// Standardizes every feature with mean/std fitted on the train split.
    ///
    /// Features with zero variance on the train split become 0 everywhere.
    pub fn normalize(mut self) -> Self {
        let d = self.dims();
        let train = &self.split.train;
        if train.is_empty() {
            return self;
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in train {
            for (m, v) in mean.iter_mut().zip(self.features.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &i in train {
            for ((s, v), m) in var.iter_mut().zip(self.features.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        for i in 0..self.len() {
            for ((v, m), s) in self.features.row_mut(i).iter_mut().zip(&mean).zip(&std) {
                *v = if *s <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    (*v - m) / s
                };
            }
        }
        self.normalization = Some(Normalization { mean, std });
        self
    }
}
