use serde::{Deserialize, Serialize};

use super::{DenseLayer, LearnerConfig, LearnerError, MlpModel};
use crate::seed::rng_from_seed;

/// JSON model checkpoint: config, row-major weights and biases, seed.
///
/// Floats are written in shortest round-trip form, so a reload reproduces
/// every parameter bit for bit. Momentum buffers are not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: LearnerConfig,
    pub layers: Vec<CheckpointLayer>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLayer {
    /// `outputs` rows of `inputs` values each.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Checkpoint {
    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        serde_json::from_str(text).map_err(|e| LearnerError::Checkpoint(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Rebuilds the model; momentum starts at zero and the generator from `seed`.
    pub fn into_model(self) -> Result<MlpModel, LearnerError> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.into_iter().enumerate() {
            let outputs = layer.weights.len();
            let inputs = layer.weights.first().map_or(0, Vec::len);
            if layer.weights.iter().any(|r| r.len() != inputs) || layer.bias.len() != outputs {
                return Err(LearnerError::Checkpoint(format!("layer {k} is ragged")));
            }
            let weights: Vec<f64> = layer.weights.into_iter().flatten().collect();
            if weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(LearnerError::Checkpoint(format!("layer {k} is not finite")));
            }
            layers.push(DenseLayer {
                inputs,
                outputs,
                weights,
                bias: layer.bias,
            });
        }
        MlpModel::from_layers(self.config, layers, rng_from_seed(self.seed))
            .map_err(|e| LearnerError::Checkpoint(e.to_string()))
    }
}

impl MlpModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config().clone(),
            layers: self
                .layers()
                .iter()
                .map(|l| CheckpointLayer {
                    weights: l.weights.chunks_exact(l.inputs).map(<[f64]>::to_vec).collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
            seed: self.config().seed,
        }
    }
}
