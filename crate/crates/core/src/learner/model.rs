use rand::Rng;

use super::{argmax, cross_entropy, softmax, LearnerConfig, LearnerError};
use crate::seed::{rng_from_seed, SeededRng};
use crate::ClassId;

/// Affine layer `y = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Gradient (or velocity) for one layer, same shapes as [`DenseLayer`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= factor);
            l.bias.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }
}

/// Whether a forward pass samples dropout masks.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut SeededRng),
}

/// Output of [`MlpModel::forward`], consumed by [`MlpModel::backward`].
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub logits: Vec<f64>,
    /// Input vector followed by each hidden layer's output (post-rectifier,
    /// post-dropout).
    pub activations: Vec<Vec<f64>>,
    dropout_scale: f64,
    generation: u64,
}

/// MLP parameters, momentum buffers and the training generator.
#[derive(Clone, Debug)]
pub struct MlpModel {
    config: LearnerConfig,
    layers: Vec<DenseLayer>,
    velocity: Vec<LayerGradient>,
    rng: SeededRng,
    /// Bumped by every parameter update; ties forward passes to a parameter state.
    generation: u64,
}

impl MlpModel {
    /// Uniform init in `±weight_init_scale / sqrt(fan_in)`, zero biases.
    pub fn init(config: &LearnerConfig) -> Result<Self, LearnerError> {
        config.validate()?;
        let mut rng = rng_from_seed(config.seed);
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = config.weight_init_scale / (fan_in as f64).sqrt();
                let mut layer = DenseLayer::zeros(fan_in, fan_out);
                for v in &mut layer.weights {
                    *v = rng.random_range(-bound..=bound);
                }
                layer
            })
            .collect();
        Self::from_layers(config.clone(), layers, rng)
    }

    pub(crate) fn from_layers(
        config: LearnerConfig,
        layers: Vec<DenseLayer>,
        rng: SeededRng,
    ) -> Result<Self, LearnerError> {
        config.validate()?;
        let expected: Vec<(usize, usize)> =
            config.layer_sizes.windows(2).map(|w| (w[0], w[1])).collect();
        let actual: Vec<(usize, usize)> = layers.iter().map(|l| (l.inputs, l.outputs)).collect();
        if expected != actual
            || layers
                .iter()
                .any(|l| l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs)
        {
            return Err(LearnerError::Config(format!(
                "layer shapes {actual:?} do not match layer_sizes {:?}",
                config.layer_sizes
            )));
        }
        let mut model = Self {
            config,
            layers,
            velocity: Vec::new(),
            rng,
            generation: 0,
        };
        model.velocity = Gradients::zeros_like(&model).layers;
        Ok(model)
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Direct parameter access; invalidates outstanding forward passes.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn velocity(&self) -> &[LayerGradient] {
        &self.velocity
    }

    pub(crate) fn rng_mut(&mut self) -> &mut SeededRng {
        &mut self.rng
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), LearnerError> {
        if x.len() != self.config.input_dim() {
            return Err(LearnerError::InvalidInput(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.config.input_dim()
            )));
        }
        Ok(())
    }

    /// Hidden layers: affine, rectifier, then inverted dropout in train mode.
    /// The output layer is affine only.
    pub fn forward(&self, x: &[f64], mut mode: Mode<'_>) -> Result<ForwardPass, LearnerError> {
        self.check_input(x)?;
        let rate = self.config.dropout_rate;
        let dropping = rate > 0.0 && matches!(mode, Mode::Train(_));
        let keep_scale = if dropping { 1.0 / (1.0 - rate) } else { 1.0 };
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        let (output, hidden) = self.layers.split_last().expect("at least one layer");
        for layer in hidden {
            let mut h = layer.apply(activations.last().expect("nonempty"));
            for v in &mut h {
                *v = v.max(0.0);
            }
            if let (true, Mode::Train(rng)) = (dropping, &mut mode) {
                for v in &mut h {
                    if rng.random::<f64>() < rate {
                        *v = 0.0;
                    } else {
                        *v *= keep_scale;
                    }
                }
            }
            activations.push(h);
        }
        let logits = output.apply(activations.last().expect("nonempty"));
        Ok(ForwardPass {
            logits,
            activations,
            dropout_scale: keep_scale,
            generation: self.generation,
        })
    }

    /// Exact gradients of cross-entropy over softmax for one sample.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        probs: &[f64],
        label: ClassId,
    ) -> Result<Gradients, LearnerError> {
        if pass.generation != self.generation {
            return Err(LearnerError::Contract(
                "forward pass predates the current parameters".into(),
            ));
        }
        if pass.activations.len() != self.layers.len() {
            return Err(LearnerError::Contract(
                "forward pass does not match the layer stack".into(),
            ));
        }
        let classes = self.config.class_count();
        if probs.len() != classes || label >= classes {
            return Err(LearnerError::InvalidInput(format!(
                "probs of length {} / label {label} for {classes} classes",
                probs.len()
            )));
        }
        let mut delta: Vec<f64> = probs.to_vec();
        delta[label] -= 1.0;

        let mut grads = vec![
            LayerGradient {
                weights: Vec::new(),
                bias: Vec::new(),
            };
            self.layers.len()
        ];
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &pass.activations[k];
            let mut gw = vec![0.0; layer.weights.len()];
            for (row, d) in gw.chunks_exact_mut(layer.inputs).zip(&delta) {
                for (g, v) in row.iter_mut().zip(input) {
                    *g = d * v;
                }
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // Surviving active units carry the dropout scale; dead or
                // dropped units (output 0) pass no gradient.
                for (p, a) in prev.iter_mut().zip(input) {
                    *p = if *a > 0.0 { *p * pass.dropout_scale } else { 0.0 };
                }
                grads[k] = LayerGradient {
                    weights: gw,
                    bias: delta,
                };
                delta = prev;
            } else {
                grads[k] = LayerGradient {
                    weights: gw,
                    bias: delta.clone(),
                };
            }
        }
        Ok(Gradients { layers: grads })
    }

    /// Loss and gradient for one sample in the given mode.
    pub fn loss_and_gradient(
        &self,
        x: &[f64],
        label: ClassId,
        mode: Mode<'_>,
    ) -> Result<(f64, Gradients), LearnerError> {
        let pass = self.forward(x, mode)?;
        if pass.logits.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::Diverged("non-finite logits".into()));
        }
        let probs = softmax(&pass.logits)?;
        let loss = cross_entropy(&probs, label)?;
        Ok((loss, self.backward(&pass, &probs, label)?))
    }

    /// Classical momentum: `v <- m v + g`, `theta <- theta - lr v`.
    pub fn sgd_momentum_step(&mut self, grads: &Gradients, lr: f64) -> Result<(), LearnerError> {
        if grads.layers.len() != self.layers.len()
            || grads.layers.iter().zip(&self.layers).any(|(g, l)| {
                g.weights.len() != l.weights.len() || g.bias.len() != l.bias.len()
            })
        {
            return Err(LearnerError::InvalidInput("gradient shapes do not match".into()));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(LearnerError::Diverged("non-finite gradient".into()));
        }
        let m = self.config.momentum;
        for ((layer, vel), g) in self.layers.iter_mut().zip(&mut self.velocity).zip(&grads.layers) {
            for ((p, v), g) in layer.weights.iter_mut().zip(&mut vel.weights).zip(&g.weights) {
                *v = m * *v + g;
                *p -= lr * *v;
            }
            for ((p, v), g) in layer.bias.iter_mut().zip(&mut vel.bias).zip(&g.bias) {
                *v = m * *v + g;
                *p -= lr * *v;
            }
        }
        self.generation += 1;
        let finite = self
            .layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(LearnerError::Diverged("parameters became non-finite".into()));
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, LearnerError> {
        softmax(&self.forward(x, Mode::Eval)?.logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassId, LearnerError> {
        Ok(argmax(&self.forward(x, Mode::Eval)?.logits))
    }

    /// Last hidden layer's post-rectifier activations (eval mode).
    ///
    /// A model without hidden layers embeds as its input.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>, LearnerError> {
        let mut pass = self.forward(x, Mode::Eval)?;
        Ok(pass.activations.pop().expect("input is always present"))
    }

    /// `passes` dropout-active forward passes, one probability row each.
    pub fn mc_predict(
        &self,
        x: &[f64],
        passes: usize,
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<f64>>, LearnerError> {
        if self.config.dropout_rate <= 0.0 {
            return Err(LearnerError::Config(
                "MC dropout needs dropout_rate > 0".into(),
            ));
        }
        if passes == 0 {
            return Err(LearnerError::InvalidInput("passes must be positive".into()));
        }
        (0..passes)
            .map(|_| softmax(&self.forward(x, Mode::Train(rng))?.logits))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sizes: Vec<usize>) -> LearnerConfig {
        LearnerConfig::new(sizes).with_seed(3)
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let mut m = MlpModel::init(&cfg(vec![3, 5, 2])).unwrap();
        for l in m.layers_mut() {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let pass = m.forward(&[1.0, -2.0, 0.5], Mode::Eval).unwrap();
        assert_eq!(pass.logits, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let mut m = MlpModel::init(&cfg(vec![2, 2])).unwrap();
        m.layers_mut()[0].weights = vec![1.0, 0.0, 0.0, 1.0];
        let pass = m.forward(&[3.0, -1.0], Mode::Eval).unwrap();
        assert_eq!(pass.logits, vec![3.0, -1.0]);
        assert!(m.forward(&[1.0], Mode::Eval).is_err());
    }

    #[test]
    fn train_and_eval_agree_without_dropout() {
        let m = MlpModel::init(&cfg(vec![4, 6, 3])).unwrap();
        let mut rng = rng_from_seed(1);
        let x = [0.3, -0.2, 1.5, 0.0];
        let a = m.forward(&x, Mode::Eval).unwrap().logits;
        let b = m.forward(&x, Mode::Train(&mut rng)).unwrap().logits;
        assert_eq!(a, b);
    }

    #[test]
    fn one_hot_correct_prediction_has_zero_gradient() {
        let m = MlpModel::init(&cfg(vec![3, 4, 3])).unwrap();
        let pass = m.forward(&[0.1, 0.2, 0.3], Mode::Eval).unwrap();
        let grads = m.backward(&pass, &[0.0, 1.0, 0.0], 1).unwrap();
        assert!(grads.iter().all(|g| g == 0.0));
    }

    #[test]
    fn stale_pass_is_rejected() {
        let mut m = MlpModel::init(&cfg(vec![2, 3, 2])).unwrap();
        let pass = m.forward(&[1.0, 1.0], Mode::Eval).unwrap();
        let probs = softmax(&pass.logits).unwrap();
        let g = m.backward(&pass, &probs, 0).unwrap();
        m.sgd_momentum_step(&g, 0.1).unwrap();
        assert!(matches!(
            m.backward(&pass, &probs, 0),
            Err(LearnerError::Contract(_))
        ));
    }

    #[test]
    fn momentum_hand_iteration() {
        let mut c = cfg(vec![1, 1]);
        c.momentum = 0.9;
        let mut m = MlpModel::init(&c).unwrap();
        let w0 = m.layers()[0].weights[0];
        let ones = Gradients {
            layers: vec![LayerGradient {
                weights: vec![1.0],
                bias: vec![1.0],
            }],
        };
        m.sgd_momentum_step(&ones, 0.1).unwrap();
        assert!((m.velocity()[0].weights[0] - 1.0).abs() < 1e-15);
        assert!((m.layers()[0].weights[0] - (w0 - 0.1)).abs() < 1e-15);
        m.sgd_momentum_step(&ones, 0.1).unwrap();
        assert!((m.velocity()[0].weights[0] - 1.9).abs() < 1e-15);
        assert!((m.layers()[0].weights[0] - (w0 - 0.1 - 0.19)).abs() < 1e-12);
    }

    #[test]
    fn plain_sgd_and_fixed_point() {
        let mut c = cfg(vec![2, 2]);
        c.momentum = 0.0;
        let mut m = MlpModel::init(&c).unwrap();
        let before = m.layers()[0].clone();
        let zero = Gradients::zeros_like(&m);
        m.sgd_momentum_step(&zero, 0.5).unwrap();
        assert_eq!(m.layers()[0], before);

        let mut g = Gradients::zeros_like(&m);
        g.layers[0].weights = vec![1.0, 2.0, 3.0, 4.0];
        m.sgd_momentum_step(&g, 0.5).unwrap();
        for (i, w) in m.layers()[0].weights.iter().enumerate() {
            let want = before.weights[i] - 0.5 * (i as f64 + 1.0);
            assert!((w - want).abs() < 1e-15);
        }
        // plain SGD has nothing left in the buffers after the step
        g.scale(0.0);
        let snapshot = m.layers()[0].clone();
        m.sgd_momentum_step(&g, 0.5).unwrap();
        assert_eq!(m.layers()[0], snapshot);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut m = MlpModel::init(&cfg(vec![2, 2])).unwrap();
        let mut g = Gradients::zeros_like(&m);
        g.layers[0].bias[1] = f64::NAN;
        assert!(matches!(
            m.sgd_momentum_step(&g, 0.1),
            Err(LearnerError::Diverged(_))
        ));
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients() {
        let m = MlpModel::init(&cfg(vec![3, 5, 4, 3])).unwrap();
        let xs = [[0.1, 0.9, -0.4], [1.0, -1.0, 0.2], [-0.3, 0.3, 0.8]];
        let ys = [0, 2, 1];
        let per: Vec<Gradients> = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| m.loss_and_gradient(x, y, Mode::Eval).unwrap().1)
            .collect();
        let mut batch = Gradients::zeros_like(&m);
        for g in &per {
            batch.add_assign(g);
        }
        batch.scale(1.0 / 3.0);
        let flat: Vec<Vec<f64>> = per.iter().map(|g| g.iter().collect()).collect();
        for (k, v) in batch.iter().enumerate() {
            let mean = (flat[0][k] + flat[1][k] + flat[2][k]) / 3.0;
            assert!((v - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_matches_argmax_of_proba_and_embed_shape() {
        let m = MlpModel::init(&cfg(vec![2, 7, 3])).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let p = m.predict_proba(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert_eq!(m.predict(&x).unwrap(), argmax(&p));
            assert_eq!(m.embed(&x).unwrap().len(), 7);
        }
    }

    #[test]
    fn mc_predict_contract() {
        let m = MlpModel::init(&cfg(vec![2, 8, 3])).unwrap();
        assert!(matches!(
            m.mc_predict(&[0.0, 1.0], 5, &mut rng_from_seed(0)),
            Err(LearnerError::Config(_))
        ));
        let m = MlpModel::init(&cfg(vec![2, 8, 3]).with_dropout(0.3)).unwrap();
        let a = m.mc_predict(&[0.5, 1.0], 10, &mut rng_from_seed(9)).unwrap();
        let b = m.mc_predict(&[0.5, 1.0], 10, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-6));
    }
}
