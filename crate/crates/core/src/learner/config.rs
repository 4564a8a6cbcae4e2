use serde::{Deserialize, Serialize};

use super::LearnerError;

/// Hyperparameters of the MLP and its optimizer.
///
/// When deserialized, omitted fields take their defaults; `lr_milestones`
/// defaults to 60% and 80% of `epochs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLearnerConfig")]
pub struct LearnerConfig {
    /// Input dimension, hidden sizes, class count.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub lr_milestones: Vec<usize>,
    pub lr_decay_factor: f64,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub weight_init_scale: f64,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLearnerConfig {
    layer_sizes: Vec<usize>,
    #[serde(default = "defaults::learning_rate")]
    learning_rate: f64,
    #[serde(default = "defaults::momentum")]
    momentum: f64,
    #[serde(default = "defaults::epochs")]
    epochs: usize,
    #[serde(default)]
    lr_milestones: Option<Vec<usize>>,
    #[serde(default = "defaults::lr_decay_factor")]
    lr_decay_factor: f64,
    #[serde(default)]
    dropout_rate: f64,
    #[serde(default = "defaults::batch_size")]
    batch_size: usize,
    #[serde(default = "defaults::weight_init_scale")]
    weight_init_scale: f64,
    #[serde(default)]
    seed: u64,
}

mod defaults {
    pub fn learning_rate() -> f64 {
        0.02
    }
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn epochs() -> usize {
        100
    }
    pub fn lr_decay_factor() -> f64 {
        0.2
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn weight_init_scale() -> f64 {
        1.0
    }
}

impl TryFrom<RawLearnerConfig> for LearnerConfig {
    type Error = LearnerError;

    fn try_from(raw: RawLearnerConfig) -> Result<Self, Self::Error> {
        let config = LearnerConfig {
            lr_milestones: raw
                .lr_milestones
                .unwrap_or_else(|| default_milestones(raw.epochs)),
            layer_sizes: raw.layer_sizes,
            learning_rate: raw.learning_rate,
            momentum: raw.momentum,
            epochs: raw.epochs,
            lr_decay_factor: raw.lr_decay_factor,
            dropout_rate: raw.dropout_rate,
            batch_size: raw.batch_size,
            weight_init_scale: raw.weight_init_scale,
            seed: raw.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Milestones at 60% and 80% of training, dropping degenerate ones.
pub fn default_milestones(epochs: usize) -> Vec<usize> {
    let mut m: Vec<usize> = [6, 8]
        .iter()
        .map(|tenths| epochs * tenths / 10)
        .filter(|&e| e > 0 && e < epochs)
        .collect();
    m.dedup();
    m
}

impl LearnerConfig {
    /// Defaults for the given layer sizes.
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        let epochs = defaults::epochs();
        Self {
            layer_sizes,
            learning_rate: defaults::learning_rate(),
            momentum: defaults::momentum(),
            epochs,
            lr_milestones: default_milestones(epochs),
            lr_decay_factor: defaults::lr_decay_factor(),
            dropout_rate: 0.0,
            batch_size: defaults::batch_size(),
            weight_init_scale: defaults::weight_init_scale(),
            seed: 0,
        }
    }

    /// Sets the epoch count and rescales the milestones to 60%/80%.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self.lr_milestones = default_milestones(epochs);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().expect("validated: at least two layers")
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: String| Err(LearnerError::Config(m));
        if self.layer_sizes.len() < 2 {
            return bad("layer_sizes needs an input and an output size".into());
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer_sizes entries must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return bad(format!("momentum {} must lie in [0, 1)", self.momentum));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.lr_milestones.windows(2).any(|w| w[0] > w[1]) {
            return bad("lr_milestones must be sorted".into());
        }
        if let Some(&m) = self.lr_milestones.iter().find(|&&m| m >= self.epochs) {
            return bad(format!("milestone {m} is not below epochs {}", self.epochs));
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 0.0) {
            return bad("lr_decay_factor must be positive".into());
        }
        if !(self.dropout_rate.is_finite() && (0.0..1.0).contains(&self.dropout_rate)) {
            return bad(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.weight_init_scale.is_finite() && self.weight_init_scale > 0.0) {
            return bad("weight_init_scale must be positive".into());
        }
        Ok(())
    }

    /// Step schedule: `learning_rate * lr_decay_factor^k`, `k` = milestones `<= epoch`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let passed = self.lr_milestones.iter().filter(|&&m| m <= epoch).count();
        self.learning_rate * self.lr_decay_factor.powi(passed as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_follows_milestones() {
        let cfg = LearnerConfig::new(vec![2, 64, 4]);
        assert_eq!(cfg.lr_milestones, vec![60, 80]);
        assert_eq!(cfg.lr_at_epoch(0), 0.02);
        assert_eq!(cfg.lr_at_epoch(59), 0.02);
        assert!((cfg.lr_at_epoch(60) - 0.004).abs() < 1e-15);
        assert!((cfg.lr_at_epoch(79) - 0.004).abs() < 1e-15);
        assert!((cfg.lr_at_epoch(80) - 0.0008).abs() < 1e-15);
        assert!((cfg.lr_at_epoch(99) - 0.0008).abs() < 1e-15);

        let mut flat = cfg.clone();
        flat.lr_milestones.clear();
        assert!((0..100).all(|e| flat.lr_at_epoch(e) == 0.02));
    }

    #[test]
    fn json_defaults_and_derived_milestones() {
        let cfg: LearnerConfig =
            serde_json::from_str(r#"{"layer_sizes":[2,8,3],"epochs":30}"#).unwrap();
        assert_eq!(cfg.lr_milestones, vec![18, 24]);
        assert_eq!(cfg.momentum, 0.9);
        assert_eq!(cfg.learning_rate, 0.02);
        assert_eq!(cfg.lr_decay_factor, 0.2);

        let back: LearnerConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let base = LearnerConfig::new(vec![2, 3]);
        let mut c = base.clone();
        c.layer_sizes = vec![2];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.lr_milestones = vec![100];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.dropout_rate = f64::NAN;
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<LearnerConfig>(r#"{"layer_sizes":[2,2],"epochs":0}"#)
            .is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn small_epoch_counts_keep_valid_milestones() {
        assert_eq!(default_milestones(1), Vec::<usize>::new());
        assert_eq!(default_milestones(5), vec![3, 4]);
        assert_eq!(default_milestones(2), vec![1]);
    }
}
