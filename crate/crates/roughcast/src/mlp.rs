//! Multi-layer perceptron regressor with analytic gradients.
//!
//! The network is an affine-activation chain with a linear scalar output.
//! Training minimizes MSE plus optional L1/L2 weight penalties (biases are
//! exempt) by mini-batch gradient descent with a choice of optimizer, and
//! returns the parameters from the best-validation-MSE epoch. Everything is
//! 64-bit: finite-difference gradient checks at 1e−4 tolerance are not
//! reliable in 32-bit arithmetic.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::NormalizationStats;
use crate::rng;

const INIT_DOMAIN: u64 = 0x4d4c50_49;
const TRAIN_DOMAIN: u64 = 0x4d4c50_54;

/// Hidden-layer activation. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

/// Negative-side slope of leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Tanh,
        Activation::Sigmoid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown activation `{s}`")))
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative as a function of the pre-activation z.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
        }
    }
}

/// Network shape: input width, hidden widths, shared hidden activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::validation("input_dim must be positive"));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::validation("hidden widths must be positive"));
        }
        Ok(())
    }

    /// Layer fan-in/fan-out pairs, output layer included.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut fan_in = self.input_dim;
        for &w in &self.hidden_widths {
            dims.push((fan_in, w));
            fan_in = w;
        }
        dims.push((fan_in, 1));
        dims
    }
}

/// A trained (or initialized) perceptron. `weights[l]` maps fan_in × fan_out;
/// the forward pass is `a_{l+1} = act(a_l · W_l + b_l)` with a linear last
/// layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub arch: MlpArchitecture,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Stats the training inputs were normalized with, carried for
    /// persistence so a saved model is self-describing.
    pub stats: Option<NormalizationStats>,
}

/// Serialized model layout (`format_version` 1).
#[derive(Serialize, Deserialize)]
struct SavedMlp {
    format_version: u32,
    architecture: MlpArchitecture,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    normalization: Option<NormalizationStats>,
}

/// Gradient of the loss, parameter-shaped.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Mini-batch optimizer choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// w ← w − lr·g
    Sgd,
    /// v ← 0.9·v + g; w ← w − lr·v
    SgdMomentum,
    /// s ← 0.9·s + 0.1·g²; w ← w − lr·g/(√s + 1e−8)
    Rmsprop,
    /// Adam with (β₁, β₂, ε) = (0.9, 0.999, 1e−8) and bias correction.
    Adam,
}

impl Optimizer {
    pub const ALL: [Optimizer; 4] = [
        Optimizer::Sgd,
        Optimizer::SgdMomentum,
        Optimizer::Rmsprop,
        Optimizer::Adam,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::SgdMomentum => "sgd_momentum",
            Optimizer::Rmsprop => "rmsprop",
            Optimizer::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown optimizer `{s}`")))
    }
}

pub const MOMENTUM: f64 = 0.9;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
const RMSPROP_EPS: f64 = 1e-8;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub l1: f64,
    pub l2: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Epochs without validation-MSE improvement before stopping.
    pub early_stopping_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 16,
            max_epochs: 500,
            l1: 0.0,
            l2: 0.0,
            optimizer: Optimizer::Adam,
            seed: 0,
            early_stopping_patience: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("max_epochs must be positive"));
        }
        if !(self.l1 >= 0.0 && self.l2 >= 0.0) {
            return Err(Error::validation("penalties must be non-negative"));
        }
        Ok(())
    }
}

/// Per-epoch full-set MSE curves (penalty excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

/// Initializes a model: He-uniform weights for relu/leaky_relu hidden
/// layers, Glorot-uniform for tanh/sigmoid and the linear output layer;
/// biases zero.
pub fn init(arch: &MlpArchitecture, seed: u64) -> Result<MlpModel> {
    arch.validate()?;
    let mut stream = rng::stream(seed, &[INIT_DOMAIN]);
    let dims = arch.layer_dims();
    let n_layers = dims.len();
    let mut weights = Vec::with_capacity(n_layers);
    let mut biases = Vec::with_capacity(n_layers);
    for (l, (fan_in, fan_out)) in dims.into_iter().enumerate() {
        let is_hidden = l + 1 < n_layers;
        let he = matches!(arch.activation, Activation::Relu | Activation::LeakyRelu);
        let limit = if is_hidden && he {
            (6.0 / fan_in as f64).sqrt()
        } else {
            (6.0 / (fan_in + fan_out) as f64).sqrt()
        };
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| stream.gen_range(-limit..limit));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(MlpModel {
        arch: arch.clone(),
        weights,
        biases,
        stats: None,
    })
}

impl MlpModel {
    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub(crate) fn check_input(&self, ncols: usize) -> Result<()> {
        if ncols != self.arch.input_dim {
            return Err(Error::validation(format!(
                "input has {ncols} columns, model expects {}",
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    /// Forward pass keeping pre-activations, for backprop.
    fn forward(&self, x: ArrayView2<'_, f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut act = Vec::with_capacity(n_layers + 1);
        act.push(x.to_owned());
        for l in 0..n_layers {
            let z = act[l].dot(&self.weights[l]) + &self.biases[l];
            let a = if l + 1 < n_layers {
                z.mapv(|v| self.arch.activation.apply(v))
            } else {
                z.clone()
            };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    /// Predicts one output per row of `x`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(x.ncols())?;
        let (_, act) = self.forward(x);
        Ok(act.last().expect("output layer").column(0).to_owned())
    }

    /// Predicts a single input row.
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let batch = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::validation(e.to_string()))?;
        Ok(self.predict(batch)?[0])
    }

    /// First-layer pre-activations for one row: z₁ = x·W₀ + b₀.
    ///
    /// Together with [`predict_from_first_layer`] this lets callers that
    /// mutate one input coordinate at a time (permutation attribution)
    /// update z₁ incrementally instead of re-doing the widest matmul.
    pub fn first_layer(&self, x: &[f64]) -> Result<Array1<f64>> {
        self.check_input(x.len())?;
        let xv = ArrayView1::from(x);
        Ok(xv.dot(&self.weights[0]) + &self.biases[0])
    }

    /// Row `j` of the first weight matrix — the change in z₁ per unit
    /// change of input coordinate `j`.
    pub fn first_layer_sensitivity(&self, j: usize) -> ArrayView1<'_, f64> {
        self.weights[0].row(j)
    }

    /// Completes a forward pass given precomputed first-layer
    /// pre-activations.
    pub fn predict_from_first_layer(&self, z1: ArrayView1<'_, f64>) -> f64 {
        let n_layers = self.weights.len();
        if n_layers == 1 {
            return z1[0];
        }
        let mut a = z1.mapv(|v| self.arch.activation.apply(v));
        for l in 1..n_layers {
            let z = a.dot(&self.weights[l]) + &self.biases[l];
            a = if l + 1 < n_layers {
                z.mapv(|v| self.arch.activation.apply(v))
            } else {
                z
            };
        }
        a[0]
    }

    /// MSE + l1·Σ|w| + l2·Σw² over the weight matrices (biases exempt).
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, l1: f64, l2: f64) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::validation("loss over an empty batch"));
        }
        if x.nrows() != y.len() {
            return Err(Error::validation(format!(
                "{} input rows vs {} targets",
                x.nrows(),
                y.len()
            )));
        }
        let pred = self.predict(x)?;
        let mse = (&pred - &y).mapv(|e| e * e).mean().expect("non-empty");
        let l1_term: f64 = self.weights.iter().map(|w| w.mapv(f64::abs).sum()).sum();
        let l2_term: f64 = self.weights.iter().map(|w| w.mapv(|v| v * v).sum()).sum();
        Ok(mse + l1 * l1_term + l2 * l2_term)
    }

    /// Analytic gradient of [`MlpModel::loss`]. The L1 subgradient uses
    /// sign(w) with sign(0) = 0.
    pub fn gradients(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        l1: f64,
        l2: f64,
    ) -> Result<Gradients> {
        if x.nrows() == 0 {
            return Err(Error::validation("gradients over an empty batch"));
        }
        if x.nrows() != y.len() {
            return Err(Error::validation(format!(
                "{} input rows vs {} targets",
                x.nrows(),
                y.len()
            )));
        }
        self.check_input(x.ncols())?;
        let n = x.nrows() as f64;
        let n_layers = self.weights.len();
        let (pre, act) = self.forward(x);

        // d MSE / d ŷ = 2(ŷ − y)/N, shaped as a column.
        let pred = act[n_layers].column(0);
        let mut delta = Array2::zeros((x.nrows(), 1));
        for (i, mut row) in delta.rows_mut().into_iter().enumerate() {
            row[0] = 2.0 * (pred[i] - y[i]) / n;
        }

        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            grad_w[l] = act[l].t().dot(&delta);
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let back = delta.dot(&self.weights[l].t());
                delta = back * pre[l - 1].mapv(|z| self.arch.activation.derivative(z));
            }
        }
        for (g, w) in grad_w.iter_mut().zip(&self.weights) {
            let penalty = w.mapv(|v| {
                // f64::signum(0.0) is 1.0; the subgradient wants sign(0) = 0.
                let sign = if v == 0.0 { 0.0 } else { v.signum() };
                l1 * sign + 2.0 * l2 * v
            });
            *g += &penalty;
        }
        Ok(Gradients {
            weights: grad_w,
            biases: grad_b,
        })
    }

    /// Saves the model as a versioned JSON document.
    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = SavedMlp {
            format_version: 1,
            architecture: self.arch.clone(),
            weights: self.weights.clone(),
            biases: self.biases.clone(),
            normalization: self.stats.clone(),
        };
        let text = serde_json::to_string(&doc)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads a model saved by [`MlpModel::save`].
    pub fn load(path: &Path) -> Result<MlpModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: SavedMlp = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        if doc.format_version != 1 {
            return Err(Error::format(format!(
                "{}: unsupported format_version {}",
                path.display(),
                doc.format_version
            )));
        }
        let model = MlpModel {
            arch: doc.architecture,
            weights: doc.weights,
            biases: doc.biases,
            stats: doc.normalization,
        };
        model.arch.validate()?;
        for (l, (fan_in, fan_out)) in model.arch.layer_dims().into_iter().enumerate() {
            if model.weights.get(l).map(|w| w.dim()) != Some((fan_in, fan_out))
                || model.biases.get(l).map(|b| b.len()) != Some(fan_out)
            {
                return Err(Error::format(format!(
                    "{}: layer {l} shape does not match architecture",
                    path.display()
                )));
            }
        }
        Ok(model)
    }
}

/// Optimizer state buffers, one slot per parameter tensor.
struct OptimizerState {
    momentum_w: Vec<Array2<f64>>,
    momentum_b: Vec<Array1<f64>>,
    square_w: Vec<Array2<f64>>,
    square_b: Vec<Array1<f64>>,
    t: u64,
}

impl OptimizerState {
    fn new(model: &MlpModel) -> Self {
        OptimizerState {
            momentum_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            momentum_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            square_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            square_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, optimizer: Optimizer, lr: f64) {
        self.t += 1;
        match optimizer {
            Optimizer::Sgd => {
                for (w, g) in model.weights.iter_mut().zip(&grads.weights) {
                    *w -= &(g * lr);
                }
                for (b, g) in model.biases.iter_mut().zip(&grads.biases) {
                    *b -= &(g * lr);
                }
            }
            Optimizer::SgdMomentum => {
                for ((w, g), v) in model
                    .weights
                    .iter_mut()
                    .zip(&grads.weights)
                    .zip(&mut self.momentum_w)
                {
                    *v = &*v * MOMENTUM + g;
                    *w -= &(&*v * lr);
                }
                for ((b, g), v) in model
                    .biases
                    .iter_mut()
                    .zip(&grads.biases)
                    .zip(&mut self.momentum_b)
                {
                    *v = &*v * MOMENTUM + g;
                    *b -= &(&*v * lr);
                }
            }
            Optimizer::Rmsprop => {
                for ((w, g), s) in model
                    .weights
                    .iter_mut()
                    .zip(&grads.weights)
                    .zip(&mut self.square_w)
                {
                    *s = &*s * RMSPROP_DECAY + &g.mapv(|v| (1.0 - RMSPROP_DECAY) * v * v);
                    ndarray::Zip::from(w).and(g).and(&*s).for_each(|w, &g, &s| {
                        *w -= lr * g / (s.sqrt() + RMSPROP_EPS);
                    });
                }
                for ((b, g), s) in model
                    .biases
                    .iter_mut()
                    .zip(&grads.biases)
                    .zip(&mut self.square_b)
                {
                    *s = &*s * RMSPROP_DECAY + &g.mapv(|v| (1.0 - RMSPROP_DECAY) * v * v);
                    ndarray::Zip::from(b).and(g).and(&*s).for_each(|b, &g, &s| {
                        *b -= lr * g / (s.sqrt() + RMSPROP_EPS);
                    });
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for (((w, g), m), v) in model
                    .weights
                    .iter_mut()
                    .zip(&grads.weights)
                    .zip(&mut self.momentum_w)
                    .zip(&mut self.square_w)
                {
                    *m = &*m * ADAM_BETA1 + &g.mapv(|x| (1.0 - ADAM_BETA1) * x);
                    *v = &*v * ADAM_BETA2 + &g.mapv(|x| (1.0 - ADAM_BETA2) * x * x);
                    ndarray::Zip::from(w).and(&*m).and(&*v).for_each(|w, &m, &v| {
                        *w -= lr * (m / c1) / ((v / c2).sqrt() + ADAM_EPS);
                    });
                }
                for (((b, g), m), v) in model
                    .biases
                    .iter_mut()
                    .zip(&grads.biases)
                    .zip(&mut self.momentum_b)
                    .zip(&mut self.square_b)
                {
                    *m = &*m * ADAM_BETA1 + &g.mapv(|x| (1.0 - ADAM_BETA1) * x);
                    *v = &*v * ADAM_BETA2 + &g.mapv(|x| (1.0 - ADAM_BETA2) * x * x);
                    ndarray::Zip::from(b).and(&*m).and(&*v).for_each(|b, &m, &v| {
                        *b -= lr * (m / c1) / ((v / c2).sqrt() + ADAM_EPS);
                    });
                }
            }
        }
    }
}

fn full_mse(model: &MlpModel, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    let pred = model.predict(x)?;
    Ok((&pred - &y).mapv(|e| e * e).mean().expect("non-empty"))
}

/// Trains with per-epoch seeded shuffling, returning the parameters from the
/// epoch with the lowest validation MSE and the full MSE history.
pub fn train(
    model: &MlpModel,
    train_x: ArrayView2<'_, f64>,
    train_y: ArrayView1<'_, f64>,
    val_x: ArrayView2<'_, f64>,
    val_y: ArrayView1<'_, f64>,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    if train_x.nrows() == 0 || val_x.nrows() == 0 {
        return Err(Error::validation("train and validation sets must be non-empty"));
    }
    if train_x.nrows() != train_y.len() || val_x.nrows() != val_y.len() {
        return Err(Error::validation("input rows and targets must align"));
    }
    let mut current = model.clone();
    current.check_input(train_x.ncols())?;
    current.check_input(val_x.ncols())?;

    let mut state = OptimizerState::new(&current);
    let mut history = TrainHistory {
        train_mse: Vec::new(),
        val_mse: Vec::new(),
        best_epoch: 0,
    };
    let mut best = current.clone();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0usize;
    let mut indices: Vec<usize> = (0..train_x.nrows()).collect();

    for epoch in 0..config.max_epochs {
        let mut stream = rng::stream(config.seed, &[TRAIN_DOMAIN, epoch as u64]);
        indices.shuffle(&mut stream);
        for chunk in indices.chunks(config.batch_size) {
            let bx = train_x.select(Axis(0), chunk);
            let by = train_y.select(Axis(0), chunk);
            let grads = current.gradients(bx.view(), by.view(), config.l1, config.l2)?;
            state.step(&mut current, &grads, config.optimizer, config.learning_rate);
        }

        let train_mse = full_mse(&current, train_x, train_y)?;
        let val_mse = full_mse(&current, val_x, val_y)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.train_mse.push(train_mse);
        history.val_mse.push(val_mse);

        if val_mse < best_val {
            best_val = val_mse;
            best = current.clone();
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stopping_patience {
                break;
            }
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array};
    use rand::SeedableRng;

    fn arch(input: usize, hidden: Vec<usize>, activation: Activation) -> MlpArchitecture {
        MlpArchitecture {
            input_dim: input,
            hidden_widths: hidden,
            activation,
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = arch(5, vec![3], Activation::Relu);
        assert_eq!(init(&a, 7).unwrap(), init(&a, 7).unwrap());
        assert_ne!(init(&a, 7).unwrap(), init(&a, 8).unwrap());
    }

    #[test]
    fn parameter_counts_match_shape_arithmetic() {
        // 5·3 + 3 hidden + 3·1 + 1 output = 22.
        let m = init(&arch(5, vec![3], Activation::Relu), 0).unwrap();
        assert_eq!(m.num_parameters(), 22);
        // No hidden layer: a single linear map.
        let m = init(&arch(4, vec![], Activation::Tanh), 0).unwrap();
        assert_eq!(m.num_parameters(), 5);
        assert_eq!(m.weights.len(), 1);
    }

    #[test]
    fn zero_weight_model_outputs_bias() {
        let mut m = init(&arch(3, vec![2], Activation::Relu), 0).unwrap();
        for w in m.weights.iter_mut() {
            w.fill(0.0);
        }
        m.biases[1][0] = 1.25;
        assert_eq!(m.predict_row(&[4.0, -2.0, 9.0]).unwrap(), 1.25);
    }

    #[test]
    fn linear_model_is_exact_affine_map() {
        let mut m = init(&arch(2, vec![], Activation::Relu), 0).unwrap();
        m.weights[0] = array![[2.0], [-3.0]];
        m.biases[0][0] = 0.5;
        assert_eq!(m.predict_row(&[1.0, 1.0]).unwrap(), -0.5);
        assert_eq!(m.predict_row(&[10.0, 0.0]).unwrap(), 20.5);
    }

    #[test]
    fn batch_prediction_matches_rowwise() {
        let m = init(&arch(4, vec![5, 3], Activation::Tanh), 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Array::from_shape_fn((6, 4), |_| rng.gen_range(-2.0..2.0));
        let batch = m.predict(x.view()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let single = m.predict_row(row.as_slice().unwrap()).unwrap();
            assert_relative_eq!(batch[i], single, max_relative = 1e-14);
        }
    }

    #[test]
    fn first_layer_path_matches_predict() {
        let m = init(&arch(5, vec![4, 3], Activation::LeakyRelu), 9).unwrap();
        let x = [0.3, -1.0, 2.0, 0.7, -0.2];
        let z1 = m.first_layer(&x).unwrap();
        assert_relative_eq!(
            m.predict_from_first_layer(z1.view()),
            m.predict_row(&x).unwrap(),
            max_relative = 1e-14
        );
        // Incremental column update reproduces a coordinate swap.
        let mut swapped = x;
        swapped[2] = -0.5;
        let z1_swapped = &z1 + &(&m.first_layer_sensitivity(2) * (swapped[2] - x[2]));
        assert_relative_eq!(
            m.predict_from_first_layer(z1_swapped.view()),
            m.predict_row(&swapped).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn loss_hand_values() {
        // Zero-weight linear model predicts 0 everywhere.
        let mut m = init(&arch(1, vec![], Activation::Relu), 0).unwrap();
        m.weights[0].fill(0.0);
        let x = array![[1.0], [1.0]];
        let y = array![3.0, 4.0];
        assert_relative_eq!(m.loss(x.view(), y.view(), 0.0, 0.0).unwrap(), 12.5);

        // Perfect predictions, no penalty → 0.
        m.weights[0][[0, 0]] = 1.0;
        let y_eq = array![1.0, 1.0];
        assert_eq!(m.loss(x.view(), y_eq.view(), 0.0, 0.0).unwrap(), 0.0);

        // Single weight 2: l2 = 1 adds exactly 4; l1 = 1 adds exactly 2.
        m.weights[0][[0, 0]] = 2.0;
        let base = m.loss(x.view(), y.view(), 0.0, 0.0).unwrap();
        assert_relative_eq!(m.loss(x.view(), y.view(), 0.0, 1.0).unwrap(), base + 4.0);
        assert_relative_eq!(m.loss(x.view(), y.view(), 1.0, 0.0).unwrap(), base + 2.0);
    }

    #[test]
    fn loss_rejects_empty_batch() {
        let m = init(&arch(2, vec![], Activation::Relu), 0).unwrap();
        let x = Array2::<f64>::zeros((0, 2));
        let y = Array1::<f64>::zeros(0);
        assert!(m.loss(x.view(), y.view(), 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_gradient_closed_form() {
        let mut m = init(&arch(2, vec![], Activation::Relu), 0).unwrap();
        m.weights[0] = array![[1.0], [-1.0]];
        m.biases[0][0] = 0.0;
        let x = array![[3.0, 2.0]];
        let y = array![0.5];
        // ŷ = 1, e = 0.5 ⇒ ∂loss/∂w = 2e·x = [3, 2], ∂loss/∂b = 1.
        let g = m.gradients(x.view(), y.view(), 0.0, 0.0).unwrap();
        assert_relative_eq!(g.weights[0][[0, 0]], 3.0);
        assert_relative_eq!(g.weights[0][[1, 0]], 2.0);
        assert_relative_eq!(g.biases[0][0], 1.0);
    }

    #[test]
    fn gradient_vanishes_at_least_squares_optimum() {
        // y = 2x + 1 is exactly realizable; at (w, b) = (2, 1) the gradient
        // of the pure MSE is identically zero.
        let mut m = init(&arch(1, vec![], Activation::Relu), 0).unwrap();
        m.weights[0][[0, 0]] = 2.0;
        m.biases[0][0] = 1.0;
        let x = array![[0.0], [1.0], [2.0], [5.0]];
        let y = array![1.0, 3.0, 5.0, 11.0];
        let g = m.gradients(x.view(), y.view(), 0.0, 0.0).unwrap();
        assert!(g.weights[0][[0, 0]].abs() < 1e-10);
        assert!(g.biases[0][0].abs() < 1e-10);
    }

    /// Smallest |pre-activation| across all hidden units and batch rows.
    /// Finite differences are invalid when a relu-family kink lies inside
    /// the probe interval, so kink-adjacent draws get rejected.
    fn hidden_kink_margin(m: &MlpModel, x: &Array2<f64>) -> f64 {
        let mut a = x.clone();
        let mut margin = f64::INFINITY;
        for l in 0..m.weights.len() - 1 {
            let z = a.dot(&m.weights[l]) + &m.biases[l];
            margin = z.iter().fold(margin, |acc, v| acc.min(v.abs()));
            a = z.mapv(|v| m.arch.activation.apply(v));
        }
        margin
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let cases: Vec<(MlpArchitecture, f64, f64)> = Activation::ALL
            .iter()
            .flat_map(|&act| {
                vec![
                    (arch(3, vec![], act), 0.0, 0.0),
                    (arch(3, vec![4], act), 0.0, 0.0),
                    (arch(2, vec![3, 2], act), 0.01, 0.0),
                    (arch(2, vec![3], act), 0.0, 0.02),
                    (arch(4, vec![5, 3], act), 0.01, 0.02),
                ]
            })
            .collect();
        assert!(cases.len() >= 20);
        let h = 1e-5;
        for (a, l1, l2) in cases {
            let mut m = init(&a, rng.gen()).unwrap();
            // Shift weights away from 0 so the l1 non-differentiability
            // stays out of the probe interval.
            for w in m.weights.iter_mut() {
                w.mapv_inplace(|v| v + 0.05 * v.signum());
            }
            let piecewise = matches!(a.activation, Activation::Relu | Activation::LeakyRelu);
            let (x, y) = loop {
                let x = Array::from_shape_fn((5, a.input_dim), |_| rng.gen_range(-1.0..1.0));
                let y = Array::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0));
                if !piecewise || m.weights.len() == 1 || hidden_kink_margin(&m, &x) > 1e-3 {
                    break (x, y);
                }
            };
            let g = m.gradients(x.view(), y.view(), l1, l2).unwrap();
            for l in 0..m.weights.len() {
                let (rows, cols) = m.weights[l].dim();
                for r in 0..rows {
                    for c in 0..cols {
                        let orig = m.weights[l][[r, c]];
                        m.weights[l][[r, c]] = orig + h;
                        let up = m.loss(x.view(), y.view(), l1, l2).unwrap();
                        m.weights[l][[r, c]] = orig - h;
                        let down = m.loss(x.view(), y.view(), l1, l2).unwrap();
                        m.weights[l][[r, c]] = orig;
                        let numeric = (up - down) / (2.0 * h);
                        let analytic = g.weights[l][[r, c]];
                        let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                        assert!(
                            (numeric - analytic).abs() / denom < 1e-4,
                            "layer {l} weight ({r},{c}): numeric {numeric} vs analytic {analytic}"
                        );
                    }
                }
                for idx in 0..m.biases[l].len() {
                    let orig = m.biases[l][idx];
                    m.biases[l][idx] = orig + h;
                    let up = m.loss(x.view(), y.view(), l1, l2).unwrap();
                    m.biases[l][idx] = orig - h;
                    let down = m.loss(x.view(), y.view(), l1, l2).unwrap();
                    m.biases[l][idx] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = g.biases[l][idx];
                    let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                    assert!(
                        (numeric - analytic).abs() / denom < 1e-4,
                        "layer {l} bias {idx}: numeric {numeric} vs analytic {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn sgd_step_matches_hand_computation() {
        // One parameter w = 1, sample (x, y) = (1, 0): loss = w², grad = 2w.
        // SGD with lr 0.1: w ← 1 − 0.1·2 = 0.8.
        let mut m = init(&arch(1, vec![], Activation::Relu), 0).unwrap();
        m.weights[0][[0, 0]] = 1.0;
        let x = array![[1.0]];
        let y = array![0.0];
        let g = m.gradients(x.view(), y.view(), 0.0, 0.0).unwrap();
        let mut state = OptimizerState::new(&m);
        state.step(&mut m, &g, Optimizer::Sgd, 0.1);
        // Bias gradient is 2(ŷ−y) = 2, so b ← −0.2 as well.
        assert_relative_eq!(m.weights[0][[0, 0]], 0.8);
        assert_relative_eq!(m.biases[0][0], -0.2);
    }

    #[test]
    fn optimizer_single_steps_match_update_equations() {
        let x = array![[1.0]];
        let y = array![0.0];
        let setup = || {
            let mut m = init(&arch(1, vec![], Activation::Relu), 0).unwrap();
            m.weights[0][[0, 0]] = 1.0;
            m
        };
        // Gradient at w=1 is 2.
        let g0 = 2.0;

        let mut m = setup();
        let g = m.gradients(x.view(), y.view(), 0.0, 0.0).unwrap();
        let mut state = OptimizerState::new(&m);
        state.step(&mut m, &g, Optimizer::SgdMomentum, 0.1);
        // v = 0.9·0 + 2 = 2; w = 1 − 0.1·2.
        assert_relative_eq!(m.weights[0][[0, 0]], 1.0 - 0.1 * g0);

        let mut m = setup();
        let g = m.gradients(x.view(), y.view(), 0.0, 0.0).unwrap();
        let mut state = OptimizerState::new(&m);
        state.step(&mut m, &g, Optimizer::Rmsprop, 0.1);
        // s = 0.1·4 = 0.4; w = 1 − 0.1·2/(√0.4 + 1e−8).
        assert_relative_eq!(
            m.weights[0][[0, 0]],
            1.0 - 0.1 * g0 / (0.4f64.sqrt() + 1e-8),
            max_relative = 1e-12
        );

        let mut m = setup();
        let g = m.gradients(x.view(), y.view(), 0.0, 0.0).unwrap();
        let mut state = OptimizerState::new(&m);
        state.step(&mut m, &g, Optimizer::Adam, 0.1);
        // m̂ = g, v̂ = g² after bias correction at t=1.
        assert_relative_eq!(
            m.weights[0][[0, 0]],
            1.0 - 0.1 * g0 / (g0 + ADAM_EPS),
            max_relative = 1e-12
        );
    }

    fn line_data(n: usize, slope: f64) -> (Array2<f64>, Array1<f64>) {
        let x = Array::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        let y = x.column(0).mapv(|v| slope * v);
        (x, y)
    }

    #[test]
    fn linear_regression_converges_to_slope() {
        let (x, y) = line_data(32, 3.0);
        let m = init(&arch(1, vec![], Activation::Relu), 1).unwrap();
        let config = TrainConfig {
            learning_rate: 0.05,
            batch_size: 4,
            max_epochs: 200,
            optimizer: Optimizer::Sgd,
            early_stopping_patience: 200,
            ..TrainConfig::default()
        };
        let (trained, history) =
            train(&m, x.view(), y.view(), x.view(), y.view(), &config).unwrap();
        assert!(
            (trained.weights[0][[0, 0]] - 3.0).abs() < 0.01,
            "weight {}",
            trained.weights[0][[0, 0]]
        );
        assert!(history.train_mse.last().unwrap() < &1e-3);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (x, y) = line_data(16, 2.0);
        let m = init(&arch(1, vec![2], Activation::Tanh), 5).unwrap();
        let config = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 10,
            early_stopping_patience: 50,
            ..TrainConfig::default()
        };
        let (trained, history) =
            train(&m, x.view(), y.view(), x.view(), y.view(), &config).unwrap();
        assert_eq!(trained.weights, m.weights);
        assert!(history.train_mse.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = line_data(16, 1.5);
        let m = init(&arch(1, vec![3], Activation::Relu), 2).unwrap();
        let config = TrainConfig {
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let (a, ha) = train(&m, x.view(), y.view(), x.view(), y.view(), &config).unwrap();
        let (b, hb) = train(&m, x.view(), y.view(), x.view(), y.view(), &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn returned_model_has_best_validation_mse() {
        let (x, y) = line_data(24, 2.0);
        let val_x = Array::from_shape_fn((8, 1), |(i, _)| 0.03 + i as f64 / 8.0);
        let val_y = val_x.column(0).mapv(|v| 2.0 * v);
        let m = init(&arch(1, vec![4], Activation::Relu), 3).unwrap();
        let config = TrainConfig {
            max_epochs: 60,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (trained, history) =
            train(&m, x.view(), y.view(), val_x.view(), val_y.view(), &config).unwrap();
        let returned = full_mse(&trained, val_x.view(), val_y.view()).unwrap();
        let best_recorded = history.val_mse.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(returned, best_recorded, max_relative = 1e-12);
        assert_relative_eq!(returned, history.val_mse[history.best_epoch], max_relative = 1e-12);
        assert!(history.val_mse.iter().all(|&v| returned <= v + 1e-15));
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let (x, y) = line_data(16, 3.0);
        let m = init(&arch(1, vec![4], Activation::Relu), 1).unwrap();
        let config = TrainConfig {
            learning_rate: 1e12,
            optimizer: Optimizer::Sgd,
            max_epochs: 50,
            ..TrainConfig::default()
        };
        match train(&m, x.view(), y.view(), x.view(), y.view(), &config) {
            Err(Error::TrainingDiverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trips_bitwise() {
        let m = {
            let mut m = init(&arch(3, vec![4, 2], Activation::Sigmoid), 11).unwrap();
            m.stats = Some(crate::preprocess::NormalizationStats {
                columns: vec!["a".into(), "b".into(), "c".into()],
                min: vec![0.0, -1.0, 2.0],
                max: vec![1.0, 1.0, 3.0],
            });
            m
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let loaded = MlpModel::load(&path).unwrap();
        assert_eq!(m, loaded);
        let x = [0.1, 0.5, 0.9];
        assert_eq!(
            m.predict_row(&x).unwrap().to_bits(),
            loaded.predict_row(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn load_rejects_wrong_version_and_shapes() {
        let m = init(&arch(2, vec![2], Activation::Relu), 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"format_version\":1", "\"format_version\":9")).unwrap();
        assert!(matches!(MlpModel::load(&path), Err(Error::Format(_))));
    }
}
