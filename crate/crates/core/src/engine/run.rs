//! One active-learning run (one strategy, one seed) as a resumable state machine.
//!
//! [`ActiveLearningRun::advance`] trains a fresh model on the labeled pool,
//! evaluates it on the test split, records a [`CycleReport`] and, while budget
//! remains, selects the next query batch. The run then waits until
//! [`ActiveLearningRun::submit`] receives labels for exactly that batch. The
//! whole state serializes, so a waiting run survives a restart.

use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{AlConfig, Budget, EngineError};
use crate::acquisition::{select, AcquisitionContext, Strategy};
use crate::data::{Dataset, LabelAccess, OracleToken};
use crate::dynamics::PredictionHistory;
use crate::learner::{train, MlpModel, TrainingView};
use crate::pool::PoolState;
use crate::seed::{derive_seed, rng_from_seed};
use crate::ClassId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueriedSample {
    pub sample_id: usize,
    pub score: Option<f64>,
}

/// Metrics of the model trained at one cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub cycle: usize,
    /// Labeled samples the cycle's model was trained on.
    pub labeled_count: usize,
    pub test_accuracy: f64,
    /// Batch queried after training; empty on the final cycle.
    pub queried: Vec<QueriedSample>,
    pub wall_time_seconds: f64,
}

impl CycleReport {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &CycleReport) -> bool {
        let mut a = self.clone();
        a.wall_time_seconds = other.wall_time_seconds;
        &a == other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchStatus {
    Pending,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub sample_id: usize,
    pub features: Vec<f64>,
    /// First two embedding coordinates, present when `d > 2`.
    pub projection: Option<[f64; 2]>,
    pub prediction: ClassId,
    pub dispersion: f64,
    pub score: Option<f64>,
}

/// Samples awaiting labels from the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub cycle: usize,
    pub items: Vec<QueryItem>,
    pub status: BatchStatus,
}

impl QueryBatch {
    pub fn sample_ids(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.sample_id).collect()
    }
}

/// Labels for a query batch, keyed by sample id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSubmission {
    pub labels: BTreeMap<usize, ClassId>,
}

impl LabelSubmission {
    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::Submission(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted,
    /// The labels matched an already completed batch; nothing changed.
    AlreadyApplied,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Progress {
    Query(QueryBatch),
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CompletedBatch {
    cycle: usize,
    labels: BTreeMap<usize, ClassId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveLearningRun {
    config: AlConfig,
    seed: u64,
    budget: Budget,
    pool: PoolState,
    labels: BTreeMap<usize, ClassId>,
    /// Next cycle to train.
    cycle: usize,
    reports: Vec<CycleReport>,
    pending: Option<QueryBatch>,
    completed: Option<CompletedBatch>,
    history: Option<PredictionHistory>,
    finished: bool,
    #[serde(skip)]
    last_scores: Option<Vec<(usize, f64)>>,
}

impl ActiveLearningRun {
    /// Builds the seeded initial pool; its labels count as pre-annotated.
    pub fn new(
        config: AlConfig,
        dataset: &Dataset,
        seed: u64,
        token: &OracleToken,
    ) -> Result<Self, EngineError> {
        let budget = config.budget_for(dataset)?;
        let pool = PoolState::init(&dataset.split().train, config.initial_fraction, seed)?;
        let labels = pool
            .labeled()
            .iter()
            .map(|&i| (i, dataset.reveal(i, token)))
            .collect();
        Ok(Self {
            config,
            seed,
            budget,
            pool,
            labels,
            cycle: 0,
            reports: Vec::new(),
            pending: None,
            completed: None,
            history: None,
            finished: false,
            last_scores: None,
        })
    }

    pub fn config(&self) -> &AlConfig {
        &self.config
    }

    pub fn strategy(&self) -> Strategy {
        self.config.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    pub fn pool(&self) -> &PoolState {
        &self.pool
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn reports(&self) -> &[CycleReport] {
        &self.reports
    }

    pub fn pending(&self) -> Option<&QueryBatch> {
        self.pending.as_ref()
    }

    /// Prediction history of the most recent training run.
    pub fn history(&self) -> Option<&PredictionHistory> {
        self.history.as_ref()
    }

    /// Score table of the most recent selection (not persisted).
    pub fn last_scores(&self) -> Option<&[(usize, f64)]> {
        self.last_scores.as_deref()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Labels known to the run (initial pool plus oracle answers).
    pub fn labels(&self) -> &BTreeMap<usize, ClassId> {
        &self.labels
    }

    /// Trains the current cycle's model and, if budget remains, queries.
    ///
    /// `ground_truth` is required only by the oracle strategy.
    pub fn advance(
        &mut self,
        dataset: &Dataset,
        ground_truth: Option<&OracleToken>,
    ) -> Result<Progress, EngineError> {
        if let Some(batch) = &self.pending {
            return Ok(Progress::Query(batch.clone()));
        }
        if self.finished {
            return Ok(Progress::Finished);
        }
        let started = Instant::now();
        let strategy = self.strategy();
        let labeled: Vec<usize> = self.pool.labeled().to_vec();
        let targets: Vec<ClassId> = labeled.iter().map(|i| self.labels[i]).collect();
        // Not keyed by strategy: every strategy trains the same cycle-0 model,
        // so comparisons between strategies are paired.
        let learner = self
            .config
            .learner
            .clone()
            .with_seed(training_seed(self.seed, self.cycle));
        let mut history =
            PredictionHistory::new(self.pool.unlabeled().to_vec(), dataset.class_count());
        let view = TrainingView {
            features: dataset.features(),
            indices: &labeled,
            labels: &targets,
        };
        let model = train(&learner, view, self.pool.unlabeled(), &mut history)?;
        let test_accuracy = test_accuracy(&model, dataset)?;

        let mut queried = Vec::new();
        let query_now = self.cycle < self.budget.cycles;
        if query_now {
            let mut rng = rng_from_seed(derive_seed(
                self.seed,
                self.cycle,
                &format!("select/{}", strategy.name()),
            ));
            let mut ctx = AcquisitionContext {
                model: &model,
                dataset,
                pool: &self.pool,
                history: Some(&history),
                rng: &mut rng,
                mc_passes: self.config.mc_passes,
                ground_truth,
            };
            let selection = select(strategy, &mut ctx, self.budget.per_cycle)?;
            let dispersion: BTreeMap<usize, f64> = history
                .dispersion()?
                .into_iter()
                .map(|d| (d.sample_id, d.dispersion))
                .collect();
            let mut items = Vec::with_capacity(selection.chosen.len());
            for &i in &selection.chosen {
                let x = dataset.feature(i);
                let projection = if dataset.dims() > 2 {
                    let e = model.embed(x)?;
                    Some([e.first().copied().unwrap_or(0.0), e.get(1).copied().unwrap_or(0.0)])
                } else {
                    None
                };
                items.push(QueryItem {
                    sample_id: i,
                    features: x.to_vec(),
                    projection,
                    prediction: model.predict(x)?,
                    dispersion: dispersion[&i],
                    score: selection.score_of(i),
                });
                queried.push(QueriedSample {
                    sample_id: i,
                    score: selection.score_of(i),
                });
            }
            self.last_scores = selection.scores;
            self.pending = Some(QueryBatch {
                cycle: self.cycle,
                items,
                status: BatchStatus::Pending,
            });
        } else {
            self.last_scores = None;
            self.finished = true;
        }
        self.history = Some(history);
        self.reports.push(CycleReport {
            strategy,
            seed: self.seed,
            cycle: self.cycle,
            labeled_count: labeled.len(),
            test_accuracy,
            queried,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        });
        Ok(match &self.pending {
            Some(batch) => Progress::Query(batch.clone()),
            None => Progress::Finished,
        })
    }

    /// Applies labels for the pending batch.
    ///
    /// The submission must name exactly the pending sample ids with class ids
    /// below `C`; otherwise nothing changes. Resubmitting the labels of the
    /// batch completed last is acknowledged without effect.
    pub fn submit(
        &mut self,
        submission: &LabelSubmission,
        class_count: usize,
    ) -> Result<SubmitOutcome, EngineError> {
        if let Some(done) = &self.completed {
            if submission.labels == done.labels {
                return Ok(SubmitOutcome::AlreadyApplied);
            }
        }
        let batch = self.pending.as_ref().ok_or(EngineError::NoPendingBatch)?;
        let expected: Vec<usize> = {
            let mut ids = batch.sample_ids();
            ids.sort_unstable();
            ids
        };
        let given: Vec<usize> = submission.labels.keys().copied().collect();
        if given != expected {
            let missing: Vec<usize> = expected.iter().filter(|i| !submission.labels.contains_key(i)).copied().collect();
            let extra: Vec<usize> = given.iter().filter(|i| expected.binary_search(i).is_err()).copied().collect();
            return Err(EngineError::Submission(format!(
                "labels must cover exactly the pending batch (missing {missing:?}, unexpected {extra:?})"
            )));
        }
        if let Some((id, class)) = submission.labels.iter().find(|(_, &c)| c >= class_count) {
            return Err(EngineError::Submission(format!(
                "sample {id}: class {class} out of range for {class_count} classes"
            )));
        }
        self.pool.mark_labeled(&given)?;
        self.labels.extend(submission.labels.iter().map(|(&k, &v)| (k, v)));
        self.completed = Some(CompletedBatch {
            cycle: batch.cycle,
            labels: submission.labels.clone(),
        });
        self.pending = None;
        self.cycle += 1;
        Ok(SubmitOutcome::Accepted)
    }
}

fn test_accuracy(model: &MlpModel, dataset: &Dataset) -> Result<f64, EngineError> {
    let mut correct = 0usize;
    for &i in &dataset.split().test {
        let truth = dataset.label(i, LabelAccess::Evaluation)?;
        if model.predict(dataset.feature(i))? == truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.split().test.len() as f64)
}

/// Seed of the model trained at `cycle` of the run seeded `seed`.
pub fn training_seed(seed: u64, cycle: usize) -> u64 {
    derive_seed(seed, cycle, "train")
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    Timeout,
    Disconnected,
}

/// Source of labels for a query batch.
pub trait Oracle {
    fn annotate(&mut self, batch: &QueryBatch) -> Result<LabelSubmission, OracleError>;
}

/// Reveals ground truth.
pub struct SimulatedOracle<'a> {
    pub dataset: &'a Dataset,
    pub token: &'a OracleToken,
}

impl Oracle for SimulatedOracle<'_> {
    fn annotate(&mut self, batch: &QueryBatch) -> Result<LabelSubmission, OracleError> {
        Ok(LabelSubmission {
            labels: batch
                .items
                .iter()
                .map(|it| (it.sample_id, self.dataset.reveal(it.sample_id, self.token)))
                .collect(),
        })
    }
}

/// Waits on a channel for an external annotator, up to `timeout` per batch.
pub struct ChannelOracle {
    pub receiver: Receiver<LabelSubmission>,
    pub timeout: Duration,
}

impl Oracle for ChannelOracle {
    fn annotate(&mut self, _batch: &QueryBatch) -> Result<LabelSubmission, OracleError> {
        self.receiver
            .recv_timeout(self.timeout)
            .map_err(|e| match e {
                RecvTimeoutError::Timeout => OracleError::Timeout,
                RecvTimeoutError::Disconnected => OracleError::Disconnected,
            })
    }
}

/// One full cycle: advance, ask the oracle, apply its labels.
///
/// If the oracle times out or disconnects the run is left waiting on its
/// pending batch and a clone of it is returned in the error for resumption.
pub fn run_cycle(
    run: &mut ActiveLearningRun,
    dataset: &Dataset,
    oracle: &mut dyn Oracle,
    ground_truth: Option<&OracleToken>,
) -> Result<Option<CycleReport>, EngineError> {
    let reports_before = run.reports().len();
    let progress = run.advance(dataset, ground_truth)?;
    let report = (run.reports().len() > reports_before).then(|| run.reports()[reports_before].clone());
    if let Progress::Query(batch) = progress {
        match oracle.annotate(&batch) {
            Ok(labels) => {
                run.submit(&labels, dataset.class_count())?;
            }
            Err(reason) => {
                return Err(EngineError::CycleAborted {
                    reason: format!("{reason:?}"),
                    state: Box::new(run.clone()),
                })
            }
        }
    }
    Ok(report)
}

/// Everything one seed of one strategy produced.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub reports: Vec<CycleReport>,
    pub scores: Vec<ScoreRow>,
}

/// Row of a score dump: `sample_id,score,strategy,cycle`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: usize,
    pub score: f64,
    pub strategy: Strategy,
    pub cycle: usize,
}

/// Runs every cycle of one seed with the simulated oracle.
pub fn run_seed(
    config: &AlConfig,
    dataset: &Dataset,
    seed: u64,
    token: &OracleToken,
) -> Result<SeedRun, EngineError> {
    let mut run = ActiveLearningRun::new(config.clone(), dataset, seed, token)?;
    let mut oracle = SimulatedOracle { dataset, token };
    let mut scores = Vec::new();
    while !run.is_finished() {
        let cycle = run.cycle();
        run_cycle(&mut run, dataset, &mut oracle, Some(token))?;
        if let Some(table) = run.last_scores() {
            scores.extend(table.iter().map(|&(sample_id, score)| ScoreRow {
                sample_id,
                score,
                strategy: run.strategy(),
                cycle,
            }));
        }
    }
    Ok(SeedRun {
        reports: run.reports().to_vec(),
        scores,
    })
}
