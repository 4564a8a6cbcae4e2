//! Query strategies and the uniform selection entry point.
//!
//! Every score-based strategy follows the same convention: a higher score
//! means the sample is more valuable to label. Selection takes the `b`
//! highest scores, breaking ties by ascending sample index.

mod kcenter;
mod scores;

pub use kcenter::{covering_radius, kcenter_greedy, kcenter_picks};
pub use scores::{bald_score, entropy, margin_score};

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Matrix, OracleToken};
use crate::dynamics::{DynamicsError, PredictionHistory};
use crate::learner::{LearnerError, MlpModel};
use crate::pool::PoolState;
use crate::seed::{derive_seed, rng_from_seed, SeededRng};

/// Default number of stochastic passes for BALD.
pub const DEFAULT_MC_PASSES: usize = 25;

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("unknown strategy `{0}` (expected dispersion, margin, bald, kcenter, random or oracle)")]
    UnknownStrategy(String),
    #[error("budget {b} outside 1..={available}")]
    Budget { b: usize, available: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("the oracle strategy needs ground-truth access")]
    OracleAccessDenied,
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Dispersion,
    Margin,
    Bald,
    #[serde(rename = "kcenter")]
    KCenter,
    Random,
    Oracle,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Dispersion,
        Strategy::Margin,
        Strategy::Bald,
        Strategy::KCenter,
        Strategy::Random,
        Strategy::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dispersion => "dispersion",
            Strategy::Margin => "margin",
            Strategy::Bald => "bald",
            Strategy::KCenter => "kcenter",
            Strategy::Random => "random",
            Strategy::Oracle => "oracle",
        }
    }

    /// Strategies that rank by a per-sample score table.
    pub fn is_score_based(self) -> bool {
        matches!(self, Strategy::Dispersion | Strategy::Margin | Strategy::Bald)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = AcquisitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| AcquisitionError::UnknownStrategy(s.to_string()))
    }
}

/// Everything a strategy may look at.
pub struct AcquisitionContext<'a> {
    pub model: &'a MlpModel,
    pub dataset: &'a Dataset,
    pub pool: &'a PoolState,
    /// Predictions on the unlabeled pool from the current training run.
    pub history: Option<&'a PredictionHistory>,
    pub rng: &'a mut SeededRng,
    pub mc_passes: usize,
    /// Ground-truth access; only the oracle strategy uses it.
    pub ground_truth: Option<&'a OracleToken>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Exactly `b` distinct unlabeled indices, in selection order.
    pub chosen: Vec<usize>,
    /// `(sample, score)` for every unlabeled sample, ascending by sample.
    pub scores: Option<Vec<(usize, f64)>>,
}

impl SelectionResult {
    pub fn score_of(&self, sample: usize) -> Option<f64> {
        let table = self.scores.as_ref()?;
        table
            .binary_search_by_key(&sample, |&(s, _)| s)
            .ok()
            .map(|i| table[i].1)
    }
}

fn check_budget(b: usize, available: usize) -> Result<(), AcquisitionError> {
    if b == 0 || b > available {
        return Err(AcquisitionError::Budget { b, available });
    }
    Ok(())
}

/// The `b` best candidates by descending score, ties by ascending index.
pub fn top_b(candidates: &[usize], scores: &[f64], b: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .total_cmp(&scores[i])
            .then(candidates[i].cmp(&candidates[j]))
    });
    order.into_iter().take(b).map(|i| candidates[i]).collect()
}

fn scored(candidates: &[usize], scores: Vec<f64>, b: usize) -> SelectionResult {
    let chosen = top_b(candidates, &scores, b);
    let mut table: Vec<(usize, f64)> = candidates.iter().copied().zip(scores).collect();
    table.sort_by_key(|&(s, _)| s);
    SelectionResult {
        chosen,
        scores: Some(table),
    }
}

/// Selects `b` unlabeled samples with the named strategy.
pub fn select(
    strategy: Strategy,
    ctx: &mut AcquisitionContext<'_>,
    b: usize,
) -> Result<SelectionResult, AcquisitionError> {
    check_budget(b, ctx.pool.unlabeled().len())?;
    let unlabeled = ctx.pool.unlabeled();
    match strategy {
        Strategy::Dispersion => dispersion_select(ctx, b),
        Strategy::Margin => Ok(scored(unlabeled, margin_scores(ctx)?, b)),
        Strategy::Bald => Ok(scored(unlabeled, bald_scores(ctx)?, b)),
        Strategy::KCenter => {
            let embeddings = pool_embeddings(ctx)?;
            kcenter_greedy(&embeddings, ctx.pool.labeled(), unlabeled, b)
        }
        Strategy::Random => random_select(ctx, b),
        Strategy::Oracle => oracle_select(ctx, b),
    }
}

/// Parses a strategy name and selects; see [`select`].
pub fn select_by_name(
    name: &str,
    ctx: &mut AcquisitionContext<'_>,
    b: usize,
) -> Result<SelectionResult, AcquisitionError> {
    select(name.parse()?, ctx, b)
}

fn aligned_history<'a>(
    ctx: &AcquisitionContext<'a>,
) -> Result<&'a PredictionHistory, AcquisitionError> {
    let history = ctx
        .history
        .ok_or_else(|| AcquisitionError::Contract("dispersion needs a prediction history".into()))?;
    if history.sample_ids() != ctx.pool.unlabeled() {
        return Err(AcquisitionError::Contract(
            "prediction history is not aligned with the unlabeled pool".into(),
        ));
    }
    Ok(history)
}

pub fn dispersion_scores(ctx: &AcquisitionContext<'_>) -> Result<Vec<f64>, AcquisitionError> {
    let history = aligned_history(ctx)?;
    Ok(history.dispersion()?.into_iter().map(|d| d.dispersion).collect())
}

pub fn dispersion_select(
    ctx: &mut AcquisitionContext<'_>,
    b: usize,
) -> Result<SelectionResult, AcquisitionError> {
    check_budget(b, ctx.pool.unlabeled().len())?;
    let scores = dispersion_scores(ctx)?;
    Ok(scored(ctx.pool.unlabeled(), scores, b))
}

/// `1 - (p1 - p2)` per unlabeled sample.
pub fn margin_scores(ctx: &AcquisitionContext<'_>) -> Result<Vec<f64>, AcquisitionError> {
    if ctx.dataset.class_count() < 2 {
        return Err(AcquisitionError::Config("margin needs at least two classes".into()));
    }
    ctx.pool
        .unlabeled()
        .par_iter()
        .map(|&i| {
            let p = ctx.model.predict_proba(ctx.dataset.feature(i))?;
            Ok(margin_score(&p))
        })
        .collect()
}

/// MC-dropout mutual information per unlabeled sample.
///
/// Each sample draws its masks from a generator derived from one value of
/// `ctx.rng` and the sample index, so parallel scoring stays reproducible.
pub fn bald_scores(ctx: &mut AcquisitionContext<'_>) -> Result<Vec<f64>, AcquisitionError> {
    if ctx.model.config().dropout_rate <= 0.0 {
        return Err(AcquisitionError::Config("BALD needs dropout_rate > 0".into()));
    }
    if ctx.mc_passes < 2 {
        return Err(AcquisitionError::Config("BALD needs at least two passes".into()));
    }
    let base = ctx.rng.next_u64();
    let (model, dataset, passes) = (ctx.model, ctx.dataset, ctx.mc_passes);
    ctx.pool
        .unlabeled()
        .par_iter()
        .map(|&i| {
            let mut rng = rng_from_seed(derive_seed(base, i, "bald"));
            let rows = model.mc_predict(dataset.feature(i), passes, &mut rng)?;
            Ok(bald_score(&rows))
        })
        .collect()
}

/// Penultimate-layer embeddings for pool members; other rows stay zero.
fn pool_embeddings(ctx: &AcquisitionContext<'_>) -> Result<Matrix, AcquisitionError> {
    let pool: Vec<usize> = ctx
        .pool
        .labeled()
        .iter()
        .chain(ctx.pool.unlabeled())
        .copied()
        .collect();
    let rows: Vec<(usize, Vec<f64>)> = pool
        .par_iter()
        .map(|&i| Ok((i, ctx.model.embed(ctx.dataset.feature(i))?)))
        .collect::<Result<_, LearnerError>>()?;
    let width = rows.first().map_or(0, |(_, e)| e.len());
    let mut m = Matrix::zeros(ctx.dataset.len(), width);
    for (i, e) in rows {
        m.row_mut(i).copy_from_slice(&e);
    }
    Ok(m)
}

pub fn random_select(
    ctx: &mut AcquisitionContext<'_>,
    b: usize,
) -> Result<SelectionResult, AcquisitionError> {
    let unlabeled = ctx.pool.unlabeled();
    check_budget(b, unlabeled.len())?;
    let chosen = sample(ctx.rng, unlabeled.len(), b)
        .into_iter()
        .map(|pos| unlabeled[pos])
        .collect();
    Ok(SelectionResult {
        chosen,
        scores: None,
    })
}

/// 1 for samples the model gets wrong, 0 otherwise.
pub fn misclassified_scores(ctx: &AcquisitionContext<'_>) -> Result<Vec<f64>, AcquisitionError> {
    let token = ctx.ground_truth.ok_or(AcquisitionError::OracleAccessDenied)?;
    ctx.pool
        .unlabeled()
        .par_iter()
        .map(|&i| {
            let wrong = ctx.model.predict(ctx.dataset.feature(i))? != ctx.dataset.reveal(i, token);
            Ok(if wrong { 1.0 } else { 0.0 })
        })
        .collect()
}

/// Seeded choice among misclassified samples, topped up from the rest.
pub fn oracle_select(
    ctx: &mut AcquisitionContext<'_>,
    b: usize,
) -> Result<SelectionResult, AcquisitionError> {
    let unlabeled = ctx.pool.unlabeled();
    check_budget(b, unlabeled.len())?;
    let scores = misclassified_scores(ctx)?;
    let (wrong, right): (Vec<usize>, Vec<usize>) =
        (0..unlabeled.len()).partition(|&pos| scores[pos] > 0.0);
    let mut chosen = Vec::with_capacity(b);
    let take = |pool: &[usize], k: usize, rng: &mut SeededRng| -> Vec<usize> {
        sample(rng, pool.len(), k)
            .into_iter()
            .map(|p| unlabeled[pool[p]])
            .collect()
    };
    chosen.extend(take(&wrong, b.min(wrong.len()), ctx.rng));
    if chosen.len() < b {
        chosen.extend(take(&right, b - chosen.len(), ctx.rng));
    }
    Ok(SelectionResult {
        chosen,
        scores: Some(unlabeled.iter().copied().zip(scores).collect()),
    })
}

/// Full score table over the unlabeled pool, for ranking analyses.
///
/// Random scores are uniform draws; k-center scores encode the greedy pick
/// order over the whole pool (earlier pick = higher score).
pub fn score_table(
    strategy: Strategy,
    ctx: &mut AcquisitionContext<'_>,
) -> Result<Vec<f64>, AcquisitionError> {
    let unlabeled = ctx.pool.unlabeled();
    match strategy {
        Strategy::Dispersion => dispersion_scores(ctx),
        Strategy::Margin => margin_scores(ctx),
        Strategy::Bald => bald_scores(ctx),
        Strategy::Random => Ok((0..unlabeled.len()).map(|_| ctx.rng.random::<f64>()).collect()),
        Strategy::Oracle => misclassified_scores(ctx),
        Strategy::KCenter => {
            let embeddings = pool_embeddings(ctx)?;
            let picks = kcenter_picks(&embeddings, ctx.pool.labeled(), unlabeled, unlabeled.len())?;
            let n = unlabeled.len();
            let mut scores = vec![0.0; n];
            for (rank, (index, _)) in picks.into_iter().enumerate() {
                let pos = unlabeled.binary_search(&index).expect("pick from the pool");
                scores[pos] = (n - rank) as f64;
            }
            Ok(scores)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, BlobParams};
    use crate::learner::{LearnerConfig, MlpModel};

    struct Fixture {
        dataset: Dataset,
        pool: PoolState,
        model: MlpModel,
    }

    fn fixture(dropout: f64) -> Fixture {
        let dataset = gen_blobs(&BlobParams {
            classes: 3,
            per_class: 20,
            dims: 3,
            spread: 1.0,
            overlap: 0.5,
            seed: 2,
        })
        .unwrap();
        let pool = PoolState::init(&dataset.split().train, 0.25, 1).unwrap();
        let model = MlpModel::init(&LearnerConfig::new(vec![3, 6, 3]).with_dropout(dropout)).unwrap();
        Fixture {
            dataset,
            pool,
            model,
        }
    }

    fn ctx<'a>(f: &'a Fixture, rng: &'a mut SeededRng, token: Option<&'a OracleToken>) -> AcquisitionContext<'a> {
        AcquisitionContext {
            model: &f.model,
            dataset: &f.dataset,
            pool: &f.pool,
            history: None,
            rng,
            mc_passes: 8,
            ground_truth: token,
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!(matches!(
            "vaal".parse::<Strategy>(),
            Err(AcquisitionError::UnknownStrategy(_))
        ));
    }

    #[test]
    fn top_b_breaks_ties_by_index() {
        assert_eq!(top_b(&[5, 2, 9], &[0.3, 0.3, 0.1], 1), vec![2]);
        assert_eq!(top_b(&[1, 2, 3], &[0.0, 0.0, 0.0], 2), vec![1, 2]);
        assert_eq!(top_b(&[1, 2, 3], &[0.1, 0.9, 0.5], 3), vec![2, 3, 1]);
    }

    #[test]
    fn whole_pool_budget_returns_everything() {
        let f = fixture(0.3);
        let token = OracleToken::ground_truth();
        let n = f.pool.unlabeled().len();
        for s in [Strategy::Margin, Strategy::Bald, Strategy::KCenter, Strategy::Random, Strategy::Oracle] {
            let mut rng = rng_from_seed(0);
            let mut c = ctx(&f, &mut rng, Some(&token));
            let mut chosen = select(s, &mut c, n).unwrap().chosen;
            chosen.sort_unstable();
            assert_eq!(chosen, f.pool.unlabeled(), "{s}");
        }
    }

    #[test]
    fn budget_bounds_are_enforced() {
        let f = fixture(0.0);
        let mut rng = rng_from_seed(0);
        let mut c = ctx(&f, &mut rng, None);
        let n = f.pool.unlabeled().len();
        assert!(matches!(select(Strategy::Random, &mut c, 0), Err(AcquisitionError::Budget { .. })));
        assert!(matches!(select(Strategy::Random, &mut c, n + 1), Err(AcquisitionError::Budget { .. })));
    }

    #[test]
    fn random_is_reproducible() {
        let f = fixture(0.0);
        let run = |seed| {
            let mut rng = rng_from_seed(seed);
            let mut c = ctx(&f, &mut rng, None);
            select(Strategy::Random, &mut c, 5).unwrap().chosen
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn oracle_requires_token() {
        let f = fixture(0.0);
        let mut rng = rng_from_seed(0);
        let mut c = ctx(&f, &mut rng, None);
        assert!(matches!(
            select(Strategy::Oracle, &mut c, 2),
            Err(AcquisitionError::OracleAccessDenied)
        ));
    }

    #[test]
    fn bald_and_dispersion_preconditions() {
        let f = fixture(0.0);
        let mut rng = rng_from_seed(0);
        let mut c = ctx(&f, &mut rng, None);
        assert!(matches!(select(Strategy::Bald, &mut c, 2), Err(AcquisitionError::Config(_))));
        assert!(matches!(
            select(Strategy::Dispersion, &mut c, 2),
            Err(AcquisitionError::Contract(_))
        ));
        let misaligned = PredictionHistory::new(vec![0, 1], 3);
        c.history = Some(&misaligned);
        assert!(matches!(
            select(Strategy::Dispersion, &mut c, 2),
            Err(AcquisitionError::Contract(_))
        ));
    }

    #[test]
    fn dispersion_prefers_unstable_histories() {
        let f = fixture(0.0);
        let unlabeled = f.pool.unlabeled().to_vec();
        let mut history = PredictionHistory::new(unlabeled.clone(), 3);
        // column 1 alternates 0,1,0,1; every other column is constant
        for t in 0..4 {
            let mut row = vec![2; unlabeled.len()];
            row[1] = t % 2;
            history.record_snapshot(t, &row).unwrap();
        }
        let mut rng = rng_from_seed(0);
        let mut c = ctx(&f, &mut rng, None);
        c.history = Some(&history);
        let sel = select(Strategy::Dispersion, &mut c, 1).unwrap();
        assert_eq!(sel.chosen, vec![unlabeled[1]]);
        assert_eq!(sel.score_of(unlabeled[1]), Some(0.5));

        let sel = select(Strategy::Dispersion, &mut c, 3).unwrap();
        assert_eq!(sel.chosen, vec![unlabeled[1], unlabeled[0], unlabeled[2]]);
    }

    #[test]
    fn score_tables_cover_the_pool() {
        let f = fixture(0.2);
        let token = OracleToken::ground_truth();
        for s in [Strategy::Margin, Strategy::Bald, Strategy::KCenter, Strategy::Random, Strategy::Oracle] {
            let mut rng = rng_from_seed(0);
            let mut c = ctx(&f, &mut rng, Some(&token));
            let t = score_table(s, &mut c).unwrap();
            assert_eq!(t.len(), f.pool.unlabeled().len());
            assert!(t.iter().all(|v| v.is_finite()));
        }
    }
}
