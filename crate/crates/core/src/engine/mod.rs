//! Budgeted active-learning cycles, experiments and analyses.

mod analysis;
mod config;
mod experiment;
mod run;

pub use analysis::{
    analyze_initial_pool, average_rows, informativeness_analysis, informativeness_csv,
    train_initial_model, InformativenessRow, InitialModel,
};
pub use config::{AlConfig, Budget, ConfigError, OracleMode};
pub use experiment::{
    aggregate, aggregate_csv, compare, parse_reports_jsonl, reports_jsonl, run_experiment,
    scores_csv, write_outputs, AggregateRow, SeedOutcome, StrategyOutcome, AGGREGATE_FILE,
    REPORTS_FILE, SCORES_DIR,
};
pub use run::{
    run_cycle, run_seed, training_seed, ActiveLearningRun, BatchStatus, ChannelOracle, CycleReport,
    LabelSubmission, Oracle, OracleError, Progress, QueriedSample, QueryBatch, QueryItem,
    ScoreRow, SeedRun, SimulatedOracle, SubmitOutcome,
};

use thiserror::Error;

use crate::acquisition::AcquisitionError;
use crate::data::DataError;
use crate::dynamics::DynamicsError;
use crate::learner::LearnerError;
use crate::pool::PoolError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no query batch is pending")]
    NoPendingBatch,
    #[error("rejected label submission: {0}")]
    Submission(String),
    #[error("cycle aborted waiting for labels ({reason}); state kept for resumption")]
    CycleAborted {
        reason: String,
        state: Box<ActiveLearningRun>,
    },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
