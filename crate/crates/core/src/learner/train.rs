use rand::seq::SliceRandom;

use super::{Gradients, LearnerConfig, LearnerError, MlpModel, Mode};
use crate::data::Matrix;
use crate::ClassId;

/// Receives the eval-mode predictions on the tracked samples after every epoch.
pub trait SnapshotHook {
    fn on_epoch(&mut self, epoch: usize, predictions: &[ClassId]) -> Result<(), LearnerError>;
}

impl<F> SnapshotHook for F
where
    F: FnMut(usize, &[ClassId]),
{
    fn on_epoch(&mut self, epoch: usize, predictions: &[ClassId]) -> Result<(), LearnerError> {
        self(epoch, predictions);
        Ok(())
    }
}

/// Hook that ignores snapshots.
pub struct NoSnapshots;

impl SnapshotHook for NoSnapshots {
    fn on_epoch(&mut self, _: usize, _: &[ClassId]) -> Result<(), LearnerError> {
        Ok(())
    }
}

/// Labeled training rows addressed by index into a shared feature matrix.
#[derive(Clone, Copy, Debug)]
pub struct TrainingView<'a> {
    pub features: &'a Matrix,
    pub indices: &'a [usize],
    pub labels: &'a [ClassId],
}

impl TrainingView<'_> {
    fn validate(&self, config: &LearnerConfig, tracked: &[usize]) -> Result<(), LearnerError> {
        let bad = |m: String| Err(LearnerError::InvalidInput(m));
        if self.indices.is_empty() {
            return bad("no training samples".into());
        }
        if self.indices.len() != self.labels.len() {
            return bad(format!(
                "{} indices but {} labels",
                self.indices.len(),
                self.labels.len()
            ));
        }
        if self.features.cols() != config.input_dim() {
            return bad(format!(
                "features have {} columns, model expects {}",
                self.features.cols(),
                config.input_dim()
            ));
        }
        let n = self.features.rows();
        if let Some(&i) = self.indices.iter().chain(tracked).find(|&&i| i >= n) {
            return bad(format!("index {i} out of range for {n} rows"));
        }
        let classes = config.class_count();
        if let Some(&l) = self.labels.iter().find(|&&l| l >= classes) {
            return bad(format!("label {l} out of range for {classes} classes"));
        }
        Ok(())
    }
}

/// Trains a fresh model; calls `hook` once per epoch with predictions on `tracked`.
pub fn train(
    config: &LearnerConfig,
    data: TrainingView<'_>,
    tracked: &[usize],
    hook: &mut dyn SnapshotHook,
) -> Result<MlpModel, LearnerError> {
    train_logged(config, data, tracked, hook).map(|(model, _)| model)
}

/// As [`train`], also returning the mean training loss of every epoch.
pub fn train_logged(
    config: &LearnerConfig,
    data: TrainingView<'_>,
    tracked: &[usize],
    hook: &mut dyn SnapshotHook,
) -> Result<(MlpModel, Vec<f64>), LearnerError> {
    data.validate(config, tracked)?;
    let mut model = MlpModel::init(config)?;
    let mut order: Vec<usize> = (0..data.indices.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut predictions = vec![0; tracked.len()];

    for epoch in 0..config.epochs {
        let lr = config.lr_at_epoch(epoch);
        order.shuffle(model.rng_mut());
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&model);
            // Masks come from a cloned generator so the model can be borrowed
            // immutably; the advanced state is written back below.
            let mut rng = model.rng_mut().clone();
            for &pos in batch {
                let x = data.features.row(data.indices[pos]);
                let (loss, g) = model.loss_and_gradient(x, data.labels[pos], Mode::Train(&mut rng))?;
                loss_sum += loss;
                grads.add_assign(&g);
            }
            *model.rng_mut() = rng;
            grads.scale(1.0 / batch.len() as f64);
            model.sgd_momentum_step(&grads, lr)?;
        }
        let mean_loss = loss_sum / data.indices.len() as f64;
        if !mean_loss.is_finite() {
            return Err(LearnerError::Diverged(format!("loss is {mean_loss} at epoch {epoch}")));
        }
        epoch_losses.push(mean_loss);

        for (p, &i) in predictions.iter_mut().zip(tracked) {
            *p = model.predict(data.features.row(i))?;
        }
        hook.on_epoch(epoch, &predictions)?;
    }
    Ok((model, epoch_losses))
}
