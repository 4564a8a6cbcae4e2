//! From-scratch multilayer perceptron classifier.

mod checkpoint;
mod config;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CheckpointLayer};
pub use config::LearnerConfig;
pub use model::{DenseLayer, ForwardPass, Gradients, LayerGradient, MlpModel, Mode};
pub use train::{train, train_logged, NoSnapshots, SnapshotHook, TrainingView};

use thiserror::Error;

use crate::ClassId;

/// Smallest probability fed to the logarithm in [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("snapshot hook failed: {0}")]
    Snapshot(#[source] Box<dyn std::error::Error + Send + Sync>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, LearnerError> {
    if logits.is_empty() {
        return Err(LearnerError::InvalidInput("empty logit vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::InvalidInput("non-finite logit".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `-ln(max(probs[label], PROB_FLOOR))`.
pub fn cross_entropy(probs: &[f64], label: ClassId) -> Result<f64, LearnerError> {
    let &p = probs.get(label).ok_or_else(|| {
        LearnerError::InvalidInput(format!(
            "label {label} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
