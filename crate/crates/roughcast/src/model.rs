//! Common regressor interface and the named strategy registry.
//!
//! Every model family — the MLP and the three tree learners — trains behind
//! the same [`ModelTrainer`] trait and predicts behind [`Regressor`], so the
//! pipeline selects models by name (`mlp`, `dt`, `rf`, `et`) from
//! configuration without knowing concrete types. Trained regressors always
//! predict in raw target units; the MLP wrapper un-scales internally when it
//! was trained on a normalized target.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forest::{fit_extra_trees, fit_random_forest, fit_tree, Ensemble, ForestConfig, Tree, TreeConfig};
use crate::mlp::{self, MlpArchitecture, MlpModel, TrainConfig};
use crate::preprocess::NormalizationStats;

/// A trained regression model.
pub trait Regressor: Send + Sync {
    /// Registry name of the model family (`mlp`, `dt`, `rf`, `et`).
    fn name(&self) -> &'static str;
    fn input_dim(&self) -> usize;
    /// Concrete-type access for callers that need family-specific data
    /// (model persistence, MLP attribution fast path).
    fn as_any(&self) -> &dyn std::any::Any;
    /// Predicts one row, in raw target units.
    fn predict_row(&self, x: &[f64]) -> Result<f64>;
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            out[i] = self.predict_row(row.as_slice().ok_or_else(|| {
                Error::validation("prediction input must be contiguous")
            })?)?;
        }
        Ok(out)
    }
}

/// Training inputs shared by every model family. The validation rows drive
/// MLP early stopping; tree learners ignore them.
pub struct TrainData<'a> {
    pub train_x: ArrayView2<'a, f64>,
    pub train_y: ArrayView1<'a, f64>,
    pub val_x: ArrayView2<'a, f64>,
    pub val_y: ArrayView1<'a, f64>,
}

/// Trains one model family from shared inputs.
pub trait ModelTrainer: Send + Sync {
    fn name(&self) -> &'static str;
    fn train(&self, data: &TrainData<'_>) -> Result<Box<dyn Regressor>>;
}

/// An MLP plus the target scaling it was trained under.
pub struct MlpRegressor {
    pub model: MlpModel,
    /// Min-max stats of the single target column, when the target was
    /// normalized for training; predictions are mapped back through it.
    pub target_stats: Option<NormalizationStats>,
}

impl MlpRegressor {
    fn unscale(&self, v: f64) -> f64 {
        match &self.target_stats {
            None => v,
            Some(stats) => stats.invert_value(0, v),
        }
    }
}

impl Regressor for MlpRegressor {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn input_dim(&self) -> usize {
        self.model.arch.input_dim
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        Ok(self.unscale(self.model.predict_row(x)?))
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.model.predict(x)?.mapv(|v| self.unscale(v)))
    }
}

/// A single fitted CART tree.
pub struct TreeRegressor {
    pub tree: Tree,
}

impl Regressor for TreeRegressor {
    fn name(&self) -> &'static str {
        "dt"
    }

    fn input_dim(&self) -> usize {
        self.tree.n_features
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        self.tree.predict_row(x)
    }
}

/// A fitted tree ensemble (random forest or extra-trees).
pub struct EnsembleRegressor {
    pub ensemble: Ensemble,
    pub family: EnsembleFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleFamily {
    RandomForest,
    ExtraTrees,
}

impl Regressor for EnsembleRegressor {
    fn name(&self) -> &'static str {
        match self.family {
            EnsembleFamily::RandomForest => "rf",
            EnsembleFamily::ExtraTrees => "et",
        }
    }

    fn input_dim(&self) -> usize {
        self.ensemble.n_features
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        self.ensemble.predict_row(x)
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.ensemble.predict(x)
    }
}

/// Declarative model selection, as written in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Mlp {
        hidden_widths: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: mlp::Activation,
        #[serde(default)]
        train: TrainConfig,
        /// Normalize the target to [0, 1] over the training rows before
        /// fitting and un-scale predictions.
        #[serde(default = "default_true")]
        normalize_target: bool,
    },
    Dt {
        #[serde(default)]
        config: TreeConfig,
    },
    Rf {
        #[serde(default = "ForestConfig::default")]
        config: ForestConfig,
    },
    Et {
        #[serde(default = "default_et_config")]
        config: ForestConfig,
    },
}

fn default_activation() -> mlp::Activation {
    mlp::Activation::Relu
}

fn default_true() -> bool {
    true
}

fn default_et_config() -> ForestConfig {
    ForestConfig::extra_trees(0)
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Mlp { .. } => "mlp",
            ModelSpec::Dt { .. } => "dt",
            ModelSpec::Rf { .. } => "rf",
            ModelSpec::Et { .. } => "et",
        }
    }

    /// Replaces every embedded RNG seed, keying per-context training streams.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelSpec::Mlp { train, .. } => train.seed = seed,
            ModelSpec::Dt { config } => config.seed = seed,
            ModelSpec::Rf { config } | ModelSpec::Et { config } => {
                config.seed = seed;
                config.tree.seed = seed;
            }
        }
        self
    }

    pub fn trainer(&self) -> Box<dyn ModelTrainer> {
        Box::new(SpecTrainer { spec: self.clone() })
    }
}

struct SpecTrainer {
    spec: ModelSpec,
}

impl ModelTrainer for SpecTrainer {
    fn name(&self) -> &'static str {
        self.spec.name()
    }

    fn train(&self, data: &TrainData<'_>) -> Result<Box<dyn Regressor>> {
        if data.train_x.nrows() != data.train_y.len() {
            return Err(Error::validation(format!(
                "{} training rows vs {} targets",
                data.train_x.nrows(),
                data.train_y.len()
            )));
        }
        match &self.spec {
            ModelSpec::Mlp {
                hidden_widths,
                activation,
                train,
                normalize_target,
            } => {
                let arch = MlpArchitecture {
                    input_dim: data.train_x.ncols(),
                    hidden_widths: hidden_widths.clone(),
                    activation: *activation,
                };
                let (train_y, val_y, target_stats) = if *normalize_target {
                    let column = data
                        .train_y
                        .view()
                        .into_shape_with_order((data.train_y.len(), 1))
                        .map_err(|e| Error::validation(e.to_string()))?;
                    let stats = crate::preprocess::fit_minmax(
                        column,
                        &["target.final_roughness".to_string()],
                    )?;
                    let scale = |y: ArrayView1<'_, f64>| -> Array1<f64> {
                        y.mapv(|v| stats.apply_value(0, v))
                    };
                    (scale(data.train_y), scale(data.val_y), Some(stats))
                } else {
                    (data.train_y.to_owned(), data.val_y.to_owned(), None)
                };
                let model = mlp::init(&arch, train.seed)?;
                let (model, _history) = mlp::train(
                    &model,
                    data.train_x,
                    train_y.view(),
                    data.val_x,
                    val_y.view(),
                    train,
                )?;
                Ok(Box::new(MlpRegressor {
                    model,
                    target_stats,
                }))
            }
            ModelSpec::Dt { config } => {
                let tree = fit_tree(data.train_x, data.train_y, config)?;
                Ok(Box::new(TreeRegressor { tree }))
            }
            ModelSpec::Rf { config } => {
                let ensemble = fit_random_forest(data.train_x, data.train_y, config)?;
                Ok(Box::new(EnsembleRegressor {
                    ensemble,
                    family: EnsembleFamily::RandomForest,
                }))
            }
            ModelSpec::Et { config } => {
                let ensemble = fit_extra_trees(data.train_x, data.train_y, config)?;
                Ok(Box::new(EnsembleRegressor {
                    ensemble,
                    family: EnsembleFamily::ExtraTrees,
                }))
            }
        }
    }
}

/// Named trainer registry; selection by name at run time.
pub struct ModelRegistry {
    entries: BTreeMap<String, Box<dyn ModelTrainer>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        ModelRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// Registry with the four built-in families under default settings.
    pub fn with_defaults() -> Self {
        let mut registry = ModelRegistry::new();
        for spec in [
            ModelSpec::Mlp {
                hidden_widths: vec![32],
                activation: default_activation(),
                train: TrainConfig::default(),
                normalize_target: true,
            },
            ModelSpec::Dt {
                config: TreeConfig::default(),
            },
            ModelSpec::Rf {
                config: ForestConfig::random_forest(0),
            },
            ModelSpec::Et {
                config: ForestConfig::extra_trees(0),
            },
        ] {
            registry.register(spec.trainer());
        }
        registry
    }

    /// Registers a trainer under its name, replacing any previous entry.
    pub fn register(&mut self, trainer: Box<dyn ModelTrainer>) {
        self.entries.insert(trainer.name().to_string(), trainer);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ModelTrainer> {
        self.entries
            .get(name)
            .map(|t| t.as_ref())
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown model `{name}`; registered: {}",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn train(&self, name: &str, data: &TrainData<'_>) -> Result<Box<dyn Regressor>> {
        self.get(name)?.train(data)
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

/// Convenience constructor for [`TrainData`] views.
impl<'a> TrainData<'a> {
    pub fn new(
        train_x: &'a Array2<f64>,
        train_y: &'a Array1<f64>,
        val_x: &'a Array2<f64>,
        val_y: &'a Array1<f64>,
    ) -> Self {
        TrainData {
            train_x: train_x.view(),
            train_y: train_y.view(),
            val_x: val_x.view(),
            val_y: val_y.view(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_data(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array::from_shape_fn((n, 3), |_| rng.gen_range(0.0..1.0));
        let y = Array::from_shape_fn(n, |i| 2.0 * x[[i, 0]] - x[[i, 2]] + 5.0);
        (x, y)
    }

    #[test]
    fn registry_lists_builtin_families() {
        let registry = ModelRegistry::with_defaults();
        assert_eq!(registry.names(), vec!["dt", "et", "mlp", "rf"]);
        assert!(registry.get("xgb").is_err());
    }

    #[test]
    fn every_family_trains_and_predicts_through_the_trait() {
        let (x, y) = toy_data(1, 60);
        let (vx, vy) = toy_data(2, 20);
        let data = TrainData::new(&x, &y, &vx, &vy);
        let registry = ModelRegistry::with_defaults();
        for name in ["dt", "rf", "et", "mlp"] {
            let model = registry.train(name, &data).unwrap();
            assert_eq!(model.name(), name);
            assert_eq!(model.input_dim(), 3);
            let pred = model.predict(x.view()).unwrap();
            assert_eq!(pred.len(), 60);
            assert!(pred.iter().all(|v| v.is_finite()), "{name} predicted non-finite");
        }
    }

    #[test]
    fn tree_families_interpolate_training_data() {
        let (x, y) = toy_data(3, 40);
        let data = TrainData::new(&x, &y, &x, &y);
        let registry = ModelRegistry::with_defaults();
        for name in ["dt", "et"] {
            let model = registry.train(name, &data).unwrap();
            let pred = model.predict(x.view()).unwrap();
            for (p, t) in pred.iter().zip(y.iter()) {
                assert_relative_eq!(p, t, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn mlp_regressor_unscales_target() {
        // Targets far from [0, 1]: the wrapper must map back to raw units.
        let (x, y) = toy_data(4, 80);
        let (vx, vy) = toy_data(5, 20);
        let spec = ModelSpec::Mlp {
            hidden_widths: vec![8],
            activation: mlp::Activation::Relu,
            train: TrainConfig {
                max_epochs: 300,
                ..TrainConfig::default()
            },
            normalize_target: true,
        };
        let model = spec.trainer().train(&TrainData::new(&x, &y, &vx, &vy)).unwrap();
        let pred = model.predict(x.view()).unwrap();
        let mean_pred = pred.sum() / pred.len() as f64;
        let mean_y = y.sum() / y.len() as f64;
        // Raw targets sit around 5.5; normalized-space outputs near 0.5
        // would betray a missing inversion.
        assert!((mean_pred - mean_y).abs() < 1.0, "mean prediction {mean_pred} vs target {mean_y}");
    }

    #[test]
    fn with_seed_rekeys_every_family() {
        let spec = ModelSpec::Et {
            config: ForestConfig::extra_trees(0),
        }
        .with_seed(7);
        match spec {
            ModelSpec::Et { config } => {
                assert_eq!(config.seed, 7);
                assert_eq!(config.tree.seed, 7);
            }
            _ => unreachable!(),
        }
        let spec = ModelSpec::Mlp {
            hidden_widths: vec![4],
            activation: mlp::Activation::Tanh,
            train: TrainConfig::default(),
            normalize_target: false,
        }
        .with_seed(9);
        match spec {
            ModelSpec::Mlp { train, .. } => assert_eq!(train.seed, 9),
            _ => unreachable!(),
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ModelSpec::Rf {
            config: ForestConfig::random_forest(3),
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"model\":\"rf\""));
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
