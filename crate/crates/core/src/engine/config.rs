use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{Strategy, DEFAULT_MC_PASSES};
use crate::data::Dataset;
use crate::learner::LearnerConfig;
use crate::pool::fraction_count;

/// A configuration problem, located by its JSON path.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    #[default]
    Simulated,
    Interactive,
}

/// Experiment protocol: budgets, strategy, learner and seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlConfig {
    #[serde(default = "defaults::initial_fraction")]
    pub initial_fraction: f64,
    #[serde(default = "defaults::budget_per_cycle_fraction")]
    pub budget_per_cycle_fraction: f64,
    #[serde(default = "defaults::cycles")]
    pub cycles: usize,
    #[serde(default = "defaults::strategy")]
    pub strategy: Strategy,
    pub learner: LearnerConfig,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub oracle_mode: OracleMode,
    #[serde(default = "defaults::mc_passes")]
    pub mc_passes: usize,
}

mod defaults {
    use super::Strategy;

    pub fn initial_fraction() -> f64 {
        0.10
    }
    pub fn budget_per_cycle_fraction() -> f64 {
        0.05
    }
    pub fn cycles() -> usize {
        4
    }
    pub fn strategy() -> Strategy {
        Strategy::Dispersion
    }
    pub fn seeds() -> Vec<u64> {
        vec![0, 1, 2]
    }
    pub fn mc_passes() -> usize {
        super::DEFAULT_MC_PASSES
    }
}

/// Integer sample counts derived from the fractions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub initial: usize,
    pub per_cycle: usize,
    pub cycles: usize,
}

impl Budget {
    pub fn total(&self) -> usize {
        self.initial + self.per_cycle * self.cycles
    }

    pub fn labeled_after(&self, cycle: usize) -> usize {
        self.initial + self.per_cycle * cycle
    }
}

impl AlConfig {
    pub fn new(learner: LearnerConfig) -> Self {
        Self {
            initial_fraction: defaults::initial_fraction(),
            budget_per_cycle_fraction: defaults::budget_per_cycle_fraction(),
            cycles: defaults::cycles(),
            strategy: defaults::strategy(),
            learner,
            seeds: defaults::seeds(),
            oracle_mode: OracleMode::Simulated,
            mc_passes: defaults::mc_passes(),
        }
    }

    /// Parses and validates a JSON config; errors carry the offending path.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: AlConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fraction_ok = |f: f64| f.is_finite() && f > 0.0 && f < 1.0;
        if !fraction_ok(self.initial_fraction) {
            return Err(ConfigError::at("initial_fraction", "must lie in (0, 1)"));
        }
        if !fraction_ok(self.budget_per_cycle_fraction) {
            return Err(ConfigError::at("budget_per_cycle_fraction", "must lie in (0, 1)"));
        }
        let total = self.initial_fraction + self.cycles as f64 * self.budget_per_cycle_fraction;
        if total > 1.0 + 1e-9 {
            return Err(ConfigError::at(
                "cycles",
                format!("initial + cycles x budget = {total} exceeds the pool"),
            ));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::at("seeds", "at least one seed is required"));
        }
        if self.mc_passes < 2 && self.strategy == Strategy::Bald {
            return Err(ConfigError::at("mc_passes", "BALD needs at least two passes"));
        }
        self.learner
            .validate()
            .map_err(|e| ConfigError::at("learner", e.to_string()))?;
        self.check_strategy(self.strategy)
    }

    /// Checks that the learner supports `strategy`.
    pub fn check_strategy(&self, strategy: Strategy) -> Result<(), ConfigError> {
        if strategy == Strategy::Bald && self.learner.dropout_rate <= 0.0 {
            return Err(ConfigError::at(
                "learner.dropout_rate",
                "the bald strategy needs dropout_rate > 0",
            ));
        }
        Ok(())
    }

    /// Validates against a dataset and derives the sample budget.
    pub fn budget_for(&self, dataset: &Dataset) -> Result<Budget, ConfigError> {
        self.validate()?;
        let sizes = &self.learner.layer_sizes;
        if sizes[0] != dataset.dims() || *sizes.last().expect("validated") != dataset.class_count() {
            return Err(ConfigError::at(
                "learner.layer_sizes",
                format!(
                    "{sizes:?} must start with d={} and end with C={}",
                    dataset.dims(),
                    dataset.class_count()
                ),
            ));
        }
        let n = dataset.split().train.len();
        let budget = Budget {
            initial: fraction_count(self.initial_fraction, n).max(1),
            per_cycle: fraction_count(self.budget_per_cycle_fraction, n).max(1),
            cycles: self.cycles,
        };
        if budget.total() > n {
            return Err(ConfigError::at(
                "cycles",
                format!("{} labels requested from a pool of {n}", budget.total()),
            ));
        }
        if dataset.split().test.is_empty() {
            return Err(ConfigError::at(".", "dataset has an empty test split"));
        }
        Ok(budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_takes_defaults() {
        let c = AlConfig::from_json(r#"{"learner":{"layer_sizes":[2,8,2]}}"#).unwrap();
        assert_eq!(c.initial_fraction, 0.10);
        assert_eq!(c.budget_per_cycle_fraction, 0.05);
        assert_eq!(c.cycles, 4);
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.strategy, Strategy::Dispersion);
        assert_eq!(c.oracle_mode, OracleMode::Simulated);
        assert_eq!(c.mc_passes, 25);
        assert_eq!(c.learner.epochs, 100);
    }

    #[test]
    fn errors_name_the_json_path() {
        let e = AlConfig::from_json(r#"{"learner":{"layer_sizes":[2,2],"momentum":"x"}}"#).unwrap_err();
        assert_eq!(e.path, "learner.momentum");
        let e = AlConfig::from_json(r#"{"learner":{"layer_sizes":[2,2]},"strategy":"vaal"}"#).unwrap_err();
        assert_eq!(e.path, "strategy");
        let e = AlConfig::from_json(r#"{"learner":{"layer_sizes":[2,2]},"cycles":40}"#).unwrap_err();
        assert_eq!(e.path, "cycles");
        let e = AlConfig::from_json(r#"{"learner":{"layer_sizes":[2,2]},"strategy":"bald"}"#).unwrap_err();
        assert_eq!(e.path, "learner.dropout_rate");
        let e = AlConfig::from_json(r#"{"learner":{"layer_sizes":[2,2]},"typo":1}"#).unwrap_err();
        assert_eq!(e.path, "typo");
    }

    #[test]
    fn json_round_trip() {
        let mut c = AlConfig::new(LearnerConfig::new(vec![3, 4, 2]).with_epochs(10));
        c.strategy = Strategy::KCenter;
        let back = AlConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
