//! Informativeness analysis: how often the current model is wrong on the
//! samples each strategy ranks highest. Lower accuracy on a top-ranked
//! portion means the strategy surfaces samples the model has not learned.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::training_seed;
use super::{AlConfig, EngineError};
use crate::acquisition::{score_table, AcquisitionContext, Strategy};
use crate::data::{Dataset, OracleToken};
use crate::dynamics::PredictionHistory;
use crate::learner::{train, MlpModel, TrainingView};
use crate::pool::{fraction_count, PoolState};
use crate::seed::{derive_seed, rng_from_seed};
use crate::ClassId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformativenessRow {
    pub strategy: Strategy,
    pub fraction: f64,
    pub accuracy: f64,
    /// Number of top-ranked samples evaluated.
    pub count: usize,
}

/// Model accuracy on the top `floor(p * N_u)` samples by descending score
/// (ties by ascending index), for each fraction `p`.
pub fn informativeness_analysis(
    scores: &[(usize, f64)],
    model: &MlpModel,
    dataset: &Dataset,
    token: &OracleToken,
    fractions: &[f64],
) -> Result<Vec<(f64, f64, usize)>, EngineError> {
    if fractions.is_empty() {
        return Err(EngineError::InvalidInput("no fractions given".into()));
    }
    if let Some(&f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(EngineError::InvalidInput(format!("fraction {f} outside (0, 1]")));
    }
    if scores.is_empty() {
        return Err(EngineError::InvalidInput("no scored samples".into()));
    }
    let mut ranked: Vec<(usize, f64)> = scores.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let correct: Vec<bool> = ranked
        .iter()
        .map(|&(i, _)| Ok(model.predict(dataset.feature(i))? == dataset.reveal(i, token)))
        .collect::<Result<_, EngineError>>()?;
    Ok(fractions
        .iter()
        .map(|&p| {
            let n = fraction_count(p, ranked.len()).max(1);
            let hits = correct[..n].iter().filter(|&&c| c).count();
            (p, hits as f64 / n as f64, n)
        })
        .collect())
}

/// The initial-pool model and its snapshot history for one seed.
pub struct InitialModel {
    pub pool: PoolState,
    pub model: MlpModel,
    pub history: PredictionHistory,
    pub test_accuracy: f64,
}

/// Trains the cycle-0 model of `seed`: the initial pool every strategy
/// shares, with the same training seed a run uses.
pub fn train_initial_model(
    config: &AlConfig,
    dataset: &Dataset,
    seed: u64,
    token: &OracleToken,
) -> Result<InitialModel, EngineError> {
    config.budget_for(dataset)?;
    let pool = PoolState::init(&dataset.split().train, config.initial_fraction, seed)?;
    let labels: Vec<ClassId> = pool.labeled().iter().map(|&i| dataset.reveal(i, token)).collect();
    let learner = config
        .learner
        .clone()
        .with_seed(training_seed(seed, 0));
    let mut history = PredictionHistory::new(pool.unlabeled().to_vec(), dataset.class_count());
    let view = TrainingView {
        features: dataset.features(),
        indices: pool.labeled(),
        labels: &labels,
    };
    let model = train(&learner, view, pool.unlabeled(), &mut history)?;
    let mut correct = 0;
    for (i, y) in dataset.test_set() {
        if model.predict(dataset.feature(i))? == y {
            correct += 1;
        }
    }
    let test_accuracy = correct as f64 / dataset.split().test.len() as f64;
    Ok(InitialModel {
        pool,
        model,
        history,
        test_accuracy,
    })
}

/// Informativeness rows for each strategy against one initial-pool model.
pub fn analyze_initial_pool(
    config: &AlConfig,
    dataset: &Dataset,
    seed: u64,
    strategies: &[Strategy],
    fractions: &[f64],
    token: &OracleToken,
) -> Result<(InitialModel, Vec<InformativenessRow>), EngineError> {
    let initial = train_initial_model(config, dataset, seed, token)?;
    let mut rows = Vec::new();
    for &strategy in strategies {
        config.check_strategy(strategy)?;
        let mut rng = rng_from_seed(derive_seed(seed, 0, &format!("analysis/{strategy}")));
        let mut ctx = AcquisitionContext {
            model: &initial.model,
            dataset,
            pool: &initial.pool,
            history: Some(&initial.history),
            rng: &mut rng,
            mc_passes: config.mc_passes,
            ground_truth: Some(token),
        };
        let scores = score_table(strategy, &mut ctx)?;
        let table: Vec<(usize, f64)> = initial.pool.unlabeled().iter().copied().zip(scores).collect();
        for (fraction, accuracy, count) in
            informativeness_analysis(&table, &initial.model, dataset, token, fractions)?
        {
            rows.push(InformativenessRow {
                strategy,
                fraction,
                accuracy,
                count,
            });
        }
    }
    Ok((initial, rows))
}

/// Averages rows over seeds, keyed by (strategy, fraction) in first-seen order.
pub fn average_rows(per_seed: &[Vec<InformativenessRow>]) -> Vec<InformativenessRow> {
    let Some(first) = per_seed.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let accuracy =
                per_seed.iter().map(|rows| rows[k].accuracy).sum::<f64>() / per_seed.len() as f64;
            InformativenessRow {
                accuracy,
                ..row.clone()
            }
        })
        .collect()
}

pub fn informativeness_csv(rows: &[InformativenessRow]) -> String {
    let mut out = String::from("strategy,fraction,accuracy\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.strategy, r.fraction, r.accuracy).expect("write to String");
    }
    out
}
