//! Pool-based active learning driven by training dynamics.
//!
//! The crate is organised around the active-learning cycle:
//!
//! - [`data`] holds datasets, synthetic generators and CSV interchange. Ground
//!   truth for training samples is gated behind an [`data::OracleToken`].
//! - [`learner`] is a small from-scratch MLP trained with SGD and momentum,
//!   with an epoch-end snapshot hook.
//! - [`dynamics`] records the predicted label of every tracked sample at each
//!   epoch and turns those histories into label-dispersion scores.
//! - [`acquisition`] implements the query strategies (dispersion, margin,
//!   BALD, k-center greedy, random and the ground-truth oracle).
//! - [`engine`] runs budgeted cycles, experiments over several seeds, the
//!   informativeness analysis and report persistence.

pub mod acquisition;
pub mod data;
pub mod dynamics;
pub mod engine;
pub mod learner;
pub mod pool;
pub mod seed;

/// Class identifier, `0..class_count`.
pub type ClassId = usize;

pub use acquisition::{SelectionResult, Strategy};
pub use data::{Dataset, LabelAccess, Matrix, OracleToken};
pub use dynamics::{DispersionScore, PredictionHistory};
pub use engine::{ActiveLearningRun, AlConfig, CycleReport};
pub use learner::{LearnerConfig, MlpModel};
pub use pool::PoolState;
