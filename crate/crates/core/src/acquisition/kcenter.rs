use super::{check_budget, AcquisitionError, SelectionResult};
use crate::data::Matrix;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy farthest-point picks with the distance each pick had when chosen.
///
/// Each round takes the unlabeled sample farthest from its nearest center
/// (labeled samples plus earlier picks), ties to the lowest index. With no
/// labeled samples the first pick is the lowest unlabeled index (distance 0).
pub fn kcenter_picks(
    embeddings: &Matrix,
    labeled: &[usize],
    unlabeled: &[usize],
    b: usize,
) -> Result<Vec<(usize, f64)>, AcquisitionError> {
    check_budget(b, unlabeled.len())?;
    let n = embeddings.rows();
    if let Some(&i) = labeled.iter().chain(unlabeled).find(|&&i| i >= n) {
        return Err(AcquisitionError::Contract(format!(
            "sample {i} has no embedding ({n} rows)"
        )));
    }
    let finite = labeled
        .iter()
        .chain(unlabeled)
        .all(|&i| embeddings.row(i).iter().all(|v| v.is_finite()));
    if !finite {
        return Err(AcquisitionError::Contract("embeddings must be finite".into()));
    }

    let mut candidates: Vec<usize> = unlabeled.to_vec();
    candidates.sort_unstable();
    let mut nearest = vec![f64::INFINITY; candidates.len()];
    for (slot, &u) in nearest.iter_mut().zip(&candidates) {
        let x = embeddings.row(u);
        for &l in labeled {
            *slot = slot.min(sq_dist(x, embeddings.row(l)));
        }
    }
    let mut taken = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(b);
    for _ in 0..b {
        let mut best: Option<usize> = None;
        for (pos, &d) in nearest.iter().enumerate() {
            if taken[pos] {
                continue;
            }
            if best.is_none_or(|bp| d > nearest[bp]) {
                best = Some(pos);
            }
        }
        let pos = best.expect("budget checked");
        taken[pos] = true;
        let dist = if nearest[pos].is_finite() {
            nearest[pos].sqrt()
        } else {
            0.0
        };
        let center = embeddings.row(candidates[pos]);
        for (slot, (&u, &t)) in nearest.iter_mut().zip(candidates.iter().zip(&taken)) {
            if !t {
                *slot = slot.min(sq_dist(embeddings.row(u), center));
            }
        }
        picks.push((candidates[pos], dist));
    }
    Ok(picks)
}

/// k-center greedy selection over embedding rows indexed by sample id.
pub fn kcenter_greedy(
    embeddings: &Matrix,
    labeled: &[usize],
    unlabeled: &[usize],
    b: usize,
) -> Result<SelectionResult, AcquisitionError> {
    let picks = kcenter_picks(embeddings, labeled, unlabeled, b)?;
    Ok(SelectionResult {
        chosen: picks.into_iter().map(|(i, _)| i).collect(),
        scores: None,
    })
}

/// Largest distance from any of `points` to its nearest center.
pub fn covering_radius(embeddings: &Matrix, centers: &[usize], points: &[usize]) -> f64 {
    points
        .iter()
        .map(|&p| {
            centers
                .iter()
                .map(|&c| sq_dist(embeddings.row(p), embeddings.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}
