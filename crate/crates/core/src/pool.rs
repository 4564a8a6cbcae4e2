//! Labeled / unlabeled bookkeeping over a fixed universe of training indices.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_from_seed;

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("initial fraction {fraction} of {n} samples labels nothing")]
    EmptyInitialPool { fraction: f64, n: usize },
    #[error("initial fraction {0} must lie in (0, 1)")]
    BadFraction(f64),
    #[error("sample {0} is not in the unlabeled pool")]
    NotUnlabeled(usize),
    #[error("sample {0} requested twice")]
    Duplicate(usize),
}

/// Disjoint sorted index sets whose union is the training universe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

/// `floor(fraction * n)` with a tolerance for representation error.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Seeded initial pool over `0..n`.
pub fn init_pool(n: usize, initial_fraction: f64, seed: u64) -> Result<PoolState, PoolError> {
    let universe: Vec<usize> = (0..n).collect();
    PoolState::init(&universe, initial_fraction, seed)
}

impl PoolState {
    /// Labels a seeded uniform `floor(fraction * |universe|)` subset.
    ///
    /// The result depends only on `(universe, fraction, seed)`, so every
    /// strategy in a comparison starts from the same pool.
    pub fn init(universe: &[usize], initial_fraction: f64, seed: u64) -> Result<Self, PoolError> {
        if !(initial_fraction > 0.0 && initial_fraction < 1.0) {
            return Err(PoolError::BadFraction(initial_fraction));
        }
        let n = universe.len();
        let count = fraction_count(initial_fraction, n);
        if count == 0 {
            return Err(PoolError::EmptyInitialPool {
                fraction: initial_fraction,
                n,
            });
        }
        let mut rng = rng_from_seed(seed);
        let mut chosen = vec![false; n];
        for pos in sample(&mut rng, n, count) {
            chosen[pos] = true;
        }
        let (mut labeled, mut unlabeled) = (Vec::new(), Vec::new());
        for (pos, &index) in universe.iter().enumerate() {
            if chosen[pos] {
                labeled.push(index);
            } else {
                unlabeled.push(index);
            }
        }
        labeled.sort_unstable();
        unlabeled.sort_unstable();
        Ok(Self { labeled, unlabeled })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn total(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_unlabeled(&self, index: usize) -> bool {
        self.unlabeled.binary_search(&index).is_ok()
    }

    /// Moves `indices` from unlabeled to labeled; all-or-nothing.
    pub fn mark_labeled(&mut self, indices: &[usize]) -> Result<(), PoolError> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(PoolError::Duplicate(w[0]));
        }
        if let Some(&i) = sorted.iter().find(|&&i| !self.is_unlabeled(i)) {
            return Err(PoolError::NotUnlabeled(i));
        }
        self.unlabeled.retain(|i| sorted.binary_search(i).is_err());
        self.labeled.extend_from_slice(&sorted);
        self.labeled.sort_unstable();
        Ok(())
    }
}
