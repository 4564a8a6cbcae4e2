use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Matrix, Provenance, Split};
use crate::seed::{derive_seed, rng_from_seed};

/// Distance between neighbouring class centers when `overlap = 0`.
pub const CENTER_SEPARATION: f64 = 4.0;

/// Fraction of samples held out as the test split.
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    pub classes: usize,
    pub per_class: usize,
    pub dims: usize,
    pub spread: f64,
    pub overlap: f64,
    pub seed: u64,
}

impl BlobParams {
    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidParameter(m.to_string()));
        if self.classes < 2 {
            return bad("classes must be at least 2");
        }
        if self.dims < 2 {
            return bad("dims must be at least 2");
        }
        if self.per_class == 0 {
            return bad("per_class must be positive");
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return bad("spread must be a positive finite number");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1]");
        }
        Ok(())
    }

    /// Class centers; neighbouring centers sit `CENTER_SEPARATION * (1 - overlap)` apart.
    ///
    /// With `dims >= classes` the centers are scaled basis vectors (a regular
    /// simplex). Otherwise they form a regular polygon in the first two axes.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let gap = CENTER_SEPARATION * (1.0 - self.overlap);
        (0..self.classes)
            .map(|c| {
                let mut center = vec![0.0; self.dims];
                if self.dims >= self.classes {
                    center[c] = gap / std::f64::consts::SQRT_2;
                } else {
                    let k = self.classes as f64;
                    let radius = gap / (2.0 * (std::f64::consts::PI / k).sin());
                    let angle = 2.0 * std::f64::consts::PI * c as f64 / k;
                    center[0] = radius * angle.cos();
                    center[1] = radius * angle.sin();
                }
                center
            })
            .collect()
    }
}

/// Seeded isotropic Gaussian clusters, one per class, with an 80/20 split.
pub fn gen_blobs(params: &BlobParams) -> Result<Dataset, DataError> {
    params.validate()?;
    let centers = params.centers();
    let noise = Normal::new(0.0, params.spread)
        .map_err(|e| DataError::InvalidParameter(e.to_string()))?;
    let mut rng = rng_from_seed(derive_seed(params.seed, 0, "blobs"));
    let n = params.classes * params.per_class;
    let mut data = Vec::with_capacity(n * params.dims);
    let mut labels = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..params.per_class {
            data.extend(center.iter().map(|c| c + noise.sample(&mut rng)));
            labels.push(class);
        }
    }
    let features = Matrix::new(n, params.dims, data)?;
    let split = Split::seeded(n, TEST_FRACTION, derive_seed(params.seed, 0, "split"));
    Dataset::new(
        "blobs",
        features,
        labels,
        params.classes,
        split,
        Provenance::Blobs(params.clone()),
    )
}
