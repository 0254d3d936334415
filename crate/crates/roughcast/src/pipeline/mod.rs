//! End-to-end experiment orchestration.
//!
//! A [`RunConfig`] names a dataset (on disk or synthetic), the settings
//! (a)–(f) to train, and how the MLP architecture is chosen (fixed or TPE
//! search). [`run`] executes the requested experiments — `params_only`,
//! `params_plus_sensors`, `reduced` — and [`report::emit_reports`] writes the
//! result tables, scatter data, importance rankings, and the manifest that
//! reproduces every output byte.
//!
//! Determinism: every stochastic stage draws from a stream keyed on
//! `(config.seed, domain, experiment, setting, …)`, so outputs are identical
//! across reruns and thread counts. Normalization statistics, HPO objectives,
//! and attribution backgrounds only ever see training rows.

mod report;
pub use report::{
    emit_reports, load_manifest, load_run_config, rerun, scatter_runs, scatter_svg, PersistedMlp,
    RunManifest, MANIFEST_NAME,
};

use ndarray::{s, Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::attribution::{
    self, sample_background, AblationPoint, AttributionConfig, AttributionResult,
    GlobalImportance,
};
use crate::dataset::{generate_synthetic, load_dataset, PreprocessingTechnique, SyntheticConfig};
use crate::error::{Error, Result};
use crate::features::{extract_table, FeatureTable, DEFAULT_BANDS};
use crate::forest::{ForestConfig, TreeConfig};
use crate::hpo::{self, ParamKind, ParamSpec, SearchSpace, TpeConfig, Trial};
use crate::metrics::{self, MetricsReport};
use crate::mlp::{Activation, MlpModel, Optimizer, TrainConfig};
use crate::model::{MlpRegressor, ModelRegistry, ModelSpec, TrainData};
use crate::preprocess::{self, NormalizationStats, SampleRef};
use crate::rng;

/// Sensor features kept by the reduced experiment.
pub const DEFAULT_TOP_K: usize = 20;
/// Training rows explained per setting when ranking features.
pub const DEFAULT_EXPLAIN_ROWS: usize = 32;
/// Default ablation curve grid.
pub const DEFAULT_ABLATION_KS: [usize; 5] = [5, 10, 20, 50, 100];
/// Early-stopping patience used inside cross-validated HPO trials.
const CV_PATIENCE: usize = 20;

// Domain tags separating the pipeline's derived RNG streams.
const PIPE_STUDY: u64 = 0x50495045_5354;
const PIPE_CV: u64 = 0x50495045_4356;
const PIPE_TRAIN: u64 = 0x50495045_5452;
const PIPE_TREE: u64 = 0x50495045_4653;
const PIPE_SHAP: u64 = 0x50495045_5348;

/// One of the six training settings: a single preprocessing technique or the
/// combined (all-technique) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Milling,
    Grinding,
    Polishing,
    DieEdm,
    WireEdm,
    Combined,
}

impl Setting {
    pub const ALL: [Setting; 6] = [
        Setting::Milling,
        Setting::Grinding,
        Setting::Polishing,
        Setting::DieEdm,
        Setting::WireEdm,
        Setting::Combined,
    ];

    /// The technique restriction, `None` for the combined setting.
    pub fn technique(&self) -> Option<PreprocessingTechnique> {
        match self {
            Setting::Milling => Some(PreprocessingTechnique::Milling),
            Setting::Grinding => Some(PreprocessingTechnique::Grinding),
            Setting::Polishing => Some(PreprocessingTechnique::Polishing),
            Setting::DieEdm => Some(PreprocessingTechnique::DieEdm),
            Setting::WireEdm => Some(PreprocessingTechnique::WireEdm),
            Setting::Combined => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Milling => "milling",
            Setting::Grinding => "grinding",
            Setting::Polishing => "polishing",
            Setting::DieEdm => "die_edm",
            Setting::WireEdm => "wire_edm",
            Setting::Combined => "combined",
        }
    }

    /// Row label used by the result tables.
    pub fn label(&self) -> &'static str {
        match self {
            Setting::Milling => "(a)",
            Setting::Grinding => "(b)",
            Setting::Polishing => "(c)",
            Setting::DieEdm => "(d)",
            Setting::WireEdm => "(e)",
            Setting::Combined => "(f)",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown setting `{s}`")))
    }

    fn index(&self) -> u64 {
        Self::ALL.iter().position(|x| x == self).expect("member") as u64
    }
}

/// The three experiments of the evaluation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// 4 laser parameters + initial roughness (5 inputs).
    ParamsOnly,
    /// The 5 parameter inputs plus all 1556 sensor features.
    ParamsPlusSensors,
    /// 5 parameter inputs plus the Shapley-selected top-k sensor features,
    /// retrained with tree ensembles.
    Reduced,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::ParamsOnly,
        ExperimentKind::ParamsPlusSensors,
        ExperimentKind::Reduced,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ParamsOnly => "params_only",
            ExperimentKind::ParamsPlusSensors => "params_plus_sensors",
            ExperimentKind::Reduced => "reduced",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown experiment `{s}`")))
    }

    fn index(&self) -> u64 {
        Self::ALL.iter().position(|x| x == self).expect("member") as u64
    }
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Root directory of a dataset written by [`crate::dataset::write_dataset`].
    Path(PathBuf),
    Synthetic(SyntheticConfig),
}

/// How the MLP architecture and optimizer settings are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MlpSearch {
    /// One architecture for every setting, given directly.
    Fixed {
        #[serde(default = "default_hidden")]
        hidden_widths: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
        #[serde(default = "default_train")]
        train: TrainConfig,
    },
    /// TPE search per experiment and setting; the objective is the mean
    /// k-fold validation RMSE.
    Hpo {
        #[serde(default = "default_n_trials")]
        n_trials: usize,
        #[serde(default)]
        tpe: TpeConfig,
        /// `None` uses [`pipeline_mlp_space`].
        #[serde(default)]
        space: Option<SearchSpace>,
        /// Epoch cap for the (cheaper) CV trainings inside each trial.
        #[serde(default = "default_cv_epochs")]
        cv_max_epochs: usize,
        /// Base settings for the final training; the winning trial overrides
        /// learning rate, batch size, penalties, and optimizer.
        #[serde(default = "default_train")]
        train: TrainConfig,
        /// Tune once (on the combined setting when requested) and reuse the
        /// winner for every setting of the experiment.
        #[serde(default)]
        shared_arch: bool,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![32]
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.003,
        batch_size: 16,
        max_epochs: 400,
        l1: 0.0,
        l2: 1e-4,
        optimizer: Optimizer::Adam,
        seed: 0,
        early_stopping_patience: 60,
    }
}

fn default_n_trials() -> usize {
    50
}

fn default_cv_epochs() -> usize {
    120
}

impl MlpSearch {
    /// HPO mode with every field at its configuration default.
    pub fn hpo_default() -> Self {
        MlpSearch::Hpo {
            n_trials: default_n_trials(),
            tpe: TpeConfig::default(),
            space: None,
            cv_max_epochs: default_cv_epochs(),
            train: default_train(),
            shared_arch: false,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            MlpSearch::Fixed { hidden_widths, train, .. } => {
                if hidden_widths.iter().any(|&w| w == 0) {
                    return Err(Error::validation("hidden widths must be positive"));
                }
                train.validate()
            }
            MlpSearch::Hpo { n_trials, tpe, space, cv_max_epochs, train, .. } => {
                if *n_trials == 0 {
                    return Err(Error::validation("n_trials must be positive"));
                }
                if *cv_max_epochs == 0 {
                    return Err(Error::validation("cv_max_epochs must be positive"));
                }
                tpe.validate()?;
                if let Some(space) = space {
                    space.validate()?;
                }
                train.validate()
            }
        }
    }
}

/// Search space sized for desk-scale data: narrow widths and all the keys
/// [`hpo::mlp_settings_from_params`] expects.
pub fn pipeline_mlp_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::new("learning_rate", ParamKind::LogUniform { lo: 1e-4, hi: 3e-2 }),
        ParamSpec::new(
            "batch_size",
            ParamKind::Categorical {
                options: vec!["16".into(), "32".into(), "64".into()],
            },
        ),
        ParamSpec::new("l1", ParamKind::LogUniform { lo: 1e-10, hi: 1e-4 }),
        ParamSpec::new("l2", ParamKind::LogUniform { lo: 1e-8, hi: 1e-2 }),
        ParamSpec::new(
            "optimizer",
            ParamKind::Categorical {
                options: vec!["adam".into(), "rmsprop".into()],
            },
        ),
        ParamSpec::new(
            "activation",
            ParamKind::Categorical {
                options: vec!["relu".into(), "tanh".into()],
            },
        ),
        ParamSpec::new(hpo::N_HIDDEN, ParamKind::IntUniform { lo: 1, hi: 2 }),
        ParamSpec::new("width_0", ParamKind::IntLogUniform { lo: 8, hi: 64 }),
        ParamSpec::new("width_1", ParamKind::IntLogUniform { lo: 4, hi: 32 }),
    ])
    .expect("static space is valid")
}

/// Full description of a run; the manifest serializes it verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub settings: Vec<Setting>,
    /// Master seed: the split and every derived training/search/attribution
    /// stream key off it.
    pub seed: u64,
    pub train_ratio: f64,
    /// Cross-validation folds; fold 0 also serves as the early-stopping
    /// validation set of final MLP trainings.
    pub folds: usize,
    /// Spectral bands per channel (160 reproduces the 1556-feature catalog).
    pub bands: usize,
    pub mlp: MlpSearch,
    pub attribution: AttributionConfig,
    /// Training rows explained per setting for the importance ranking.
    pub explain_rows: usize,
    /// Sensor features kept by the reduced experiment.
    pub top_k: usize,
    /// Grid for `ablate`.
    pub ablation_ks: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSource::Synthetic(SyntheticConfig::default()),
            settings: Setting::ALL.to_vec(),
            seed: 42,
            train_ratio: preprocess::TRAIN_RATIO,
            folds: preprocess::DEFAULT_FOLDS,
            bands: DEFAULT_BANDS,
            mlp: MlpSearch::Fixed {
                hidden_widths: default_hidden(),
                activation: default_activation(),
                train: default_train(),
            },
            attribution: AttributionConfig {
                permutations: 512,
                background_rows: 64,
                ..AttributionConfig::default()
            },
            explain_rows: DEFAULT_EXPLAIN_ROWS,
            top_k: DEFAULT_TOP_K,
            ablation_ks: DEFAULT_ABLATION_KS.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(Error::validation("at least one setting is required"));
        }
        let unique: BTreeSet<Setting> = self.settings.iter().copied().collect();
        if unique.len() != self.settings.len() {
            return Err(Error::validation("settings contain duplicates"));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::validation(format!(
                "train_ratio must be in (0, 1), got {}",
                self.train_ratio
            )));
        }
        if self.folds < 2 {
            return Err(Error::validation("folds must be at least 2"));
        }
        if self.bands == 0 {
            return Err(Error::validation("bands must be positive"));
        }
        if self.explain_rows == 0 {
            return Err(Error::validation("explain_rows must be positive"));
        }
        if self.top_k == 0 {
            return Err(Error::validation("top_k must be positive"));
        }
        if let DatasetSource::Synthetic(sc) = &self.dataset {
            sc.validate()?;
        }
        self.mlp.validate()?;
        self.attribution.validate()
    }

    /// Requested settings in canonical (a)–(f) order.
    pub fn canonical_settings(&self) -> Vec<Setting> {
        let requested: BTreeSet<Setting> = self.settings.iter().copied().collect();
        Setting::ALL
            .iter()
            .copied()
            .filter(|s| requested.contains(s))
            .collect()
    }
}

/// Per-setting metric rows of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub experiment: ExperimentKind,
    /// One row per requested setting, in (a)–(f) order.
    pub rows: Vec<MetricsReport>,
}

/// One test-set prediction, for scatter output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: SampleRef,
    pub ground_truth: f64,
    pub prediction: f64,
}

/// Evaluation outcome of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRun {
    pub setting: Setting,
    pub report: MetricsReport,
    pub scatter: Vec<ScatterPoint>,
}

/// Architecture and training settings selected for one experiment-setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpChoice {
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
}

/// Record of one completed hyperparameter study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyLog {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

/// Split, normalized, fold-annotated model inputs of one setting.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub setting: Setting,
    /// Input column names, parameters first.
    pub columns: Vec<String>,
    /// Source feature-table column of each input column.
    pub col_indices: Vec<usize>,
    /// Min-max statistics fitted on the training rows only.
    pub stats: NormalizationStats,
    pub train_ids: Vec<SampleRef>,
    pub test_ids: Vec<SampleRef>,
    /// Normalized inputs.
    pub train_x: Array2<f64>,
    pub test_x: Array2<f64>,
    /// Raw targets (µm).
    pub train_y: Array1<f64>,
    pub test_y: Array1<f64>,
    /// Fold of each training row.
    pub folds: Vec<usize>,
    pub k: usize,
}

impl PreparedData {
    /// Training-row indices of (rest, held-out) for one fold.
    pub fn fold_rows(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut rest = Vec::new();
        let mut held = Vec::new();
        for (i, &f) in self.folds.iter().enumerate() {
            if f == fold {
                held.push(i);
            } else {
                rest.push(i);
            }
        }
        (rest, held)
    }
}

/// Trained model, prepared data, and architecture choice of one MLP
/// experiment-setting; the reduced experiment and persistence consume these.
#[derive(Debug, Clone)]
pub struct MlpArtifacts {
    pub data: PreparedData,
    pub model: MlpModel,
    /// Target scaling the model was trained under.
    pub target_stats: Option<NormalizationStats>,
    pub choice: MlpChoice,
    /// HPO study log, when a search ran for this setting.
    pub history: Option<StudyLog>,
}

/// Outcome of the params-only experiment.
#[derive(Debug, Clone)]
pub struct ParamsOnlyRun {
    pub table: ResultsTable,
    pub runs: Vec<SettingRun>,
    pub artifacts: Vec<(Setting, MlpArtifacts)>,
}

/// Outcome of the params+sensors experiment, with per-setting artifacts.
#[derive(Debug, Clone)]
pub struct FullRun {
    pub table: ResultsTable,
    pub runs: Vec<SettingRun>,
    pub artifacts: Vec<(Setting, MlpArtifacts)>,
}

/// Feature-reduction outcome of one setting.
#[derive(Debug, Clone)]
pub struct ReducedSetting {
    pub setting: Setting,
    /// Importance over the sensor-feature block (indices are sensor-local).
    pub importance: GlobalImportance,
    /// Sensor-feature names aligned with `importance.scores`.
    pub sensor_names: Vec<String>,
    /// Names of the selected top-k sensor features, best first.
    pub selected: Vec<String>,
    /// Source-table columns of the reduced input set (params first).
    pub selected_cols: Vec<usize>,
    /// `(model name, metrics)` for every retrained tree family.
    pub per_model: Vec<(String, MetricsReport)>,
    /// Family with the highest test R².
    pub best_model: String,
}

/// Outcome of the reduced experiment.
#[derive(Debug, Clone)]
pub struct ReducedRun {
    /// Best tree family per setting, in Table-4 shape.
    pub table: ResultsTable,
    pub runs: Vec<SettingRun>,
    pub settings: Vec<ReducedSetting>,
}

/// All computed experiment outcomes of one invocation.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub config: RunConfig,
    /// Requested experiments, canonical order, deduplicated.
    pub kinds: Vec<ExperimentKind>,
    pub params_only: Option<ParamsOnlyRun>,
    /// Present whenever the full experiment ran, inline runs included.
    pub full: Option<FullRun>,
    pub reduced: Option<ReducedRun>,
    pub ablation: Option<Vec<(Setting, Vec<AblationPoint>)>>,
}

/// Loads (or generates) the dataset and extracts the model-input table.
pub fn build_feature_table(config: &RunConfig) -> Result<FeatureTable> {
    let experiments = match &config.dataset {
        DatasetSource::Path(root) => load_dataset(root)?,
        DatasetSource::Synthetic(sc) => generate_synthetic(sc)?,
    };
    extract_table(&experiments, config.bands)
}

fn index_rows(table: &FeatureTable) -> Result<BTreeMap<SampleRef, usize>> {
    let mut map = BTreeMap::new();
    for (i, id) in table.ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(Error::validation(format!(
                "duplicate sample id `{}/{}`",
                id.experiment_id, id.sample_id
            )));
        }
    }
    Ok(map)
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("owned 1-d arrays are contiguous")
}

/// Adds setting context to configuration/format errors; structured errors
/// (I/O, divergence) pass through so exit codes stay faithful.
fn with_setting(e: Error, setting: Setting) -> Error {
    match e {
        Error::Validation(msg) => {
            Error::validation(format!("setting `{}`: {msg}", setting.as_str()))
        }
        Error::Format(msg) => Error::format(format!("setting `{}`: {msg}", setting.as_str())),
        other => other,
    }
}

/// Splits, normalizes, and fold-annotates one setting over the given input
/// columns. The split shuffles within technique groups under the shared
/// seed, so each individual setting's partition is the restriction of the
/// combined one.
fn prepare(
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
    setting: Setting,
    col_indices: &[usize],
    config: &RunConfig,
) -> Result<PreparedData> {
    let mut groups: Vec<(PreprocessingTechnique, Vec<SampleRef>)> = Vec::new();
    for t in PreprocessingTechnique::ALL {
        if setting.technique().is_some_and(|st| st != t) {
            continue;
        }
        let ids: Vec<SampleRef> = table
            .ids
            .iter()
            .zip(&table.techniques)
            .filter(|(_, tt)| **tt == t)
            .map(|(id, _)| id.clone())
            .collect();
        if !ids.is_empty() {
            groups.push((t, ids));
        }
    }
    if groups.is_empty() {
        return Err(Error::validation(format!(
            "no samples for setting `{}`",
            setting.as_str()
        )));
    }

    let plan = preprocess::split(&groups, config.train_ratio, config.seed)?;
    let gather = |ids: &[SampleRef]| -> Result<(Array2<f64>, Array1<f64>)> {
        let mut x = Array2::zeros((ids.len(), col_indices.len()));
        let mut y = Array1::zeros(ids.len());
        for (i, id) in ids.iter().enumerate() {
            let &row = row_of.get(id).ok_or_else(|| {
                Error::validation(format!(
                    "sample `{}/{}` missing from feature table",
                    id.experiment_id, id.sample_id
                ))
            })?;
            for (j, &cj) in col_indices.iter().enumerate() {
                x[[i, j]] = table.inputs[[row, cj]];
            }
            y[i] = table.targets[row];
        }
        Ok((x, y))
    };
    let (train_raw, train_y) = gather(&plan.train_ids)?;
    let (test_raw, test_y) = gather(&plan.test_ids)?;

    let columns: Vec<String> = col_indices
        .iter()
        .map(|&j| table.columns[j].clone())
        .collect();
    let stats = preprocess::fit_minmax(train_raw.view(), &columns)?;
    let train_x = preprocess::apply_minmax(train_raw.view(), &stats)?;
    let test_x = preprocess::apply_minmax(test_raw.view(), &stats)?;

    let fold_plan = preprocess::kfold(&plan.train_ids, config.folds, config.seed)?;
    let fold_of: BTreeMap<&SampleRef, usize> = fold_plan
        .ids
        .iter()
        .zip(fold_plan.assignments.iter().copied())
        .collect();
    let folds: Vec<usize> = plan.train_ids.iter().map(|id| fold_of[id]).collect();

    Ok(PreparedData {
        setting,
        columns,
        col_indices: col_indices.to_vec(),
        stats,
        train_ids: plan.train_ids,
        test_ids: plan.test_ids,
        train_x,
        test_x,
        train_y,
        test_y,
        folds,
        k: config.folds,
    })
}

/// Picks the MLP architecture for one experiment-setting: the fixed one, or
/// the winner of a TPE study whose objective is mean k-fold validation RMSE.
fn choose_mlp(
    config: &RunConfig,
    kind: ExperimentKind,
    data: &PreparedData,
) -> Result<(MlpChoice, Option<StudyLog>)> {
    match &config.mlp {
        MlpSearch::Fixed { hidden_widths, activation, train } => Ok((
            MlpChoice {
                hidden_widths: hidden_widths.clone(),
                activation: *activation,
                train: train.clone(),
            },
            None,
        )),
        MlpSearch::Hpo { n_trials, tpe, space, cv_max_epochs, train: base, .. } => {
            let space = match space {
                Some(s) => s.clone(),
                None => pipeline_mlp_space(),
            };
            let tpe = TpeConfig {
                seed: rng::mix(
                    config.seed,
                    &[PIPE_STUDY, kind.index(), data.setting.index(), tpe.seed],
                ),
                ..tpe.clone()
            };
            let objective = |params: &hpo::ParamMap| -> Result<f64> {
                let (arch, cfg) = hpo::mlp_settings_from_params(params, data.train_x.ncols())?;
                let fold_rmse: Vec<f64> = (0..data.k)
                    .into_par_iter()
                    .map(|f| {
                        let (tr, va) = data.fold_rows(f);
                        let spec = ModelSpec::Mlp {
                            hidden_widths: arch.hidden_widths.clone(),
                            activation: arch.activation,
                            train: TrainConfig {
                                max_epochs: *cv_max_epochs,
                                early_stopping_patience: CV_PATIENCE,
                                seed: rng::mix(
                                    config.seed,
                                    &[PIPE_CV, kind.index(), data.setting.index(), f as u64],
                                ),
                                ..cfg.clone()
                            },
                            normalize_target: true,
                        };
                        let tx = data.train_x.select(Axis(0), &tr);
                        let ty = data.train_y.select(Axis(0), &tr);
                        let vx = data.train_x.select(Axis(0), &va);
                        let vy = data.train_y.select(Axis(0), &va);
                        let model = spec.trainer().train(&TrainData::new(&tx, &ty, &vx, &vy))?;
                        let pred = model.predict(vx.view())?;
                        metrics::rmse(slice1(&vy), slice1(&pred))
                    })
                    .collect::<Result<_>>()?;
                Ok(fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64)
            };
            let (best, trials) = hpo::run_study(objective, &space, *n_trials, &tpe)?;
            let (arch, cfg) = hpo::mlp_settings_from_params(&best.params, data.train_x.ncols())?;
            Ok((
                MlpChoice {
                    hidden_widths: arch.hidden_widths,
                    activation: arch.activation,
                    train: TrainConfig {
                        max_epochs: base.max_epochs,
                        early_stopping_patience: base.early_stopping_patience,
                        ..cfg
                    },
                },
                Some(StudyLog { best, trials }),
            ))
        }
    }
}

fn make_report(data: &PreparedData, train_pred: &Array1<f64>, test_pred: &Array1<f64>) -> Result<MetricsReport> {
    Ok(MetricsReport {
        setting: data.setting.as_str().to_string(),
        label: data.setting.label().to_string(),
        train_r2: metrics::r2(slice1(&data.train_y), slice1(train_pred))?,
        test_r2: metrics::r2(slice1(&data.test_y), slice1(test_pred))?,
        train_rmse: metrics::rmse(slice1(&data.train_y), slice1(train_pred))?,
        test_rmse: metrics::rmse(slice1(&data.test_y), slice1(test_pred))?,
        n_train: data.train_ids.len(),
        n_test: data.test_ids.len(),
    })
}

fn scatter_points(data: &PreparedData, test_pred: &Array1<f64>) -> Vec<ScatterPoint> {
    data.test_ids
        .iter()
        .zip(data.test_y.iter())
        .zip(test_pred.iter())
        .map(|((id, &truth), &pred)| ScatterPoint {
            id: id.clone(),
            ground_truth: truth,
            prediction: pred,
        })
        .collect()
}

/// Trains the final MLP of one setting (fold 0 held out for early stopping,
/// metrics over the whole training partition) and evaluates it.
fn run_mlp_setting(
    config: &RunConfig,
    kind: ExperimentKind,
    data: PreparedData,
    choice: MlpChoice,
    history: Option<StudyLog>,
) -> Result<(SettingRun, MlpArtifacts)> {
    let train = TrainConfig {
        seed: rng::mix(config.seed, &[PIPE_TRAIN, kind.index(), data.setting.index()]),
        ..choice.train.clone()
    };
    let spec = ModelSpec::Mlp {
        hidden_widths: choice.hidden_widths.clone(),
        activation: choice.activation,
        train,
        normalize_target: true,
    };
    let mut registry = ModelRegistry::new();
    registry.register(spec.trainer());

    let (rest, held) = data.fold_rows(0);
    let tx = data.train_x.select(Axis(0), &rest);
    let ty = data.train_y.select(Axis(0), &rest);
    let vx = data.train_x.select(Axis(0), &held);
    let vy = data.train_y.select(Axis(0), &held);
    let model = registry.train("mlp", &TrainData::new(&tx, &ty, &vx, &vy))?;

    let train_pred = model.predict(data.train_x.view())?;
    let test_pred = model.predict(data.test_x.view())?;
    let report = make_report(&data, &train_pred, &test_pred)?;
    let scatter = scatter_points(&data, &test_pred);

    let mlp = model
        .as_any()
        .downcast_ref::<MlpRegressor>()
        .expect("registry entry `mlp` is an MlpRegressor");
    let artifacts = MlpArtifacts {
        model: mlp.model.clone(),
        target_stats: mlp.target_stats.clone(),
        choice,
        history,
        data,
    };
    Ok((
        SettingRun {
            setting: artifacts.data.setting,
            report,
            scatter,
        },
        artifacts,
    ))
}

/// Runs one MLP experiment (params-only or params+sensors) across the
/// requested settings.
fn run_mlp_experiment(
    config: &RunConfig,
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
    kind: ExperimentKind,
) -> Result<(ResultsTable, Vec<SettingRun>, Vec<(Setting, MlpArtifacts)>)> {
    let settings = config.canonical_settings();
    let cols: Vec<usize> = match kind {
        ExperimentKind::ParamsOnly => (0..FeatureTable::N_PARAMS).collect(),
        _ => (0..table.columns.len()).collect(),
    };
    let prepared: Vec<PreparedData> = settings
        .par_iter()
        .map(|&s| prepare(table, row_of, s, &cols, config).map_err(|e| with_setting(e, s)))
        .collect::<Result<_>>()?;

    let shared = matches!(&config.mlp, MlpSearch::Hpo { shared_arch: true, .. });
    let trained: Vec<(SettingRun, MlpArtifacts)> = if shared {
        // One study feeds every setting; prefer the combined data when
        // requested since it contains all techniques.
        let study_idx = settings
            .iter()
            .position(|&s| s == Setting::Combined)
            .unwrap_or(0);
        let (choice, history) = choose_mlp(config, kind, &prepared[study_idx])
            .map_err(|e| with_setting(e, settings[study_idx]))?;
        prepared
            .into_par_iter()
            .enumerate()
            .map(|(i, data)| {
                let setting = data.setting;
                let history = if i == study_idx { history.clone() } else { None };
                run_mlp_setting(config, kind, data, choice.clone(), history)
                    .map_err(|e| with_setting(e, setting))
            })
            .collect::<Result<_>>()?
    } else {
        prepared
            .into_par_iter()
            .map(|data| {
                let setting = data.setting;
                let (choice, history) =
                    choose_mlp(config, kind, &data).map_err(|e| with_setting(e, setting))?;
                run_mlp_setting(config, kind, data, choice, history)
                    .map_err(|e| with_setting(e, setting))
            })
            .collect::<Result<_>>()?
    };

    let mut runs = Vec::with_capacity(trained.len());
    let mut artifacts = Vec::with_capacity(trained.len());
    for (run, art) in trained {
        artifacts.push((run.setting, art));
        runs.push(run);
    }
    let table = ResultsTable {
        experiment: kind,
        rows: runs.iter().map(|r| r.report.clone()).collect(),
    };
    Ok((table, runs, artifacts))
}

/// Baseline experiment: 4 laser parameters + initial roughness.
pub fn run_params_only(config: &RunConfig) -> Result<ParamsOnlyRun> {
    config.validate()?;
    let table = build_feature_table(config)?;
    let row_of = index_rows(&table)?;
    run_params_only_on(config, &table, &row_of)
}

fn run_params_only_on(
    config: &RunConfig,
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
) -> Result<ParamsOnlyRun> {
    let (table, runs, artifacts) =
        run_mlp_experiment(config, table, row_of, ExperimentKind::ParamsOnly)?;
    Ok(ParamsOnlyRun { table, runs, artifacts })
}

/// Full-input experiment: parameters plus all sensor features.
pub fn run_full(config: &RunConfig) -> Result<FullRun> {
    config.validate()?;
    let table = build_feature_table(config)?;
    let row_of = index_rows(&table)?;
    run_full_on(config, &table, &row_of)
}

fn run_full_on(
    config: &RunConfig,
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
) -> Result<FullRun> {
    let (results, runs, artifacts) =
        run_mlp_experiment(config, table, row_of, ExperimentKind::ParamsPlusSensors)?;
    Ok(FullRun {
        table: results,
        runs,
        artifacts,
    })
}

/// Evenly spaced training rows to explain (spans the technique groups, which
/// the split orders contiguously).
fn explain_subset(train_x: &Array2<f64>, m: usize) -> Array2<f64> {
    let n = train_x.nrows();
    let m = m.clamp(1, n);
    let idx: Vec<usize> = (0..m).map(|i| i * n / m).collect();
    train_x.select(Axis(0), &idx)
}

/// Shapley ranking of the sensor block for one trained full model.
fn rank_sensors(
    config: &RunConfig,
    art: &MlpArtifacts,
) -> Result<(GlobalImportance, Vec<String>)> {
    let data = &art.data;
    let n_params = FeatureTable::N_PARAMS;
    if data.columns.len() <= n_params {
        return Err(Error::validation(
            "reduction requires sensor features in the model inputs",
        ));
    }
    let attr = AttributionConfig {
        seed: rng::mix(
            config.seed,
            &[PIPE_SHAP, data.setting.index(), config.attribution.seed],
        ),
        ..config.attribution.clone()
    };
    let background = sample_background(data.train_x.view(), attr.background_rows, attr.seed)?;
    let rows = explain_subset(&data.train_x, config.explain_rows);
    let result = attribution::explain_mlp(&art.model, rows.view(), background.view(), &attr)?;
    let sensor = AttributionResult {
        base_value: result.base_value,
        phi: result.phi.slice(s![.., n_params..]).to_owned(),
    };
    let importance = attribution::global_importance(&sensor)?;
    let names: Vec<String> = data.columns[n_params..].to_vec();
    Ok((importance, names))
}

/// Input columns for a reduced model: the parameter block plus the selected
/// sensor features (source-table indices, ascending).
fn reduced_columns(data: &PreparedData, selected_local: &[usize]) -> Vec<usize> {
    let n_params = FeatureTable::N_PARAMS;
    let mut cols: Vec<usize> = (0..n_params).map(|j| data.col_indices[j]).collect();
    let mut sensor: Vec<usize> = selected_local
        .iter()
        .map(|&j| data.col_indices[n_params + j])
        .collect();
    sensor.sort_unstable();
    cols.extend(sensor);
    cols
}

const REDUCED_FAMILIES: [&str; 3] = ["dt", "rf", "et"];

fn tree_registry(config: &RunConfig, setting: Setting) -> ModelRegistry {
    let mut registry = ModelRegistry::new();
    let seed_of = |m: u64| rng::mix(config.seed, &[PIPE_TREE, setting.index(), m]);
    registry.register(
        ModelSpec::Dt {
            config: TreeConfig {
                seed: seed_of(0),
                ..TreeConfig::default()
            },
        }
        .trainer(),
    );
    registry.register(ModelSpec::Rf { config: ForestConfig::random_forest(seed_of(1)) }.trainer());
    registry.register(ModelSpec::Et { config: ForestConfig::extra_trees(seed_of(2)) }.trainer());
    registry
}

/// Trains one tree family on the reduced inputs; trees use every training
/// row (no early stopping), so train metrics cover exactly what they saw.
fn eval_tree(
    registry: &ModelRegistry,
    name: &str,
    data: &PreparedData,
) -> Result<(MetricsReport, Vec<ScatterPoint>)> {
    let (_, held) = data.fold_rows(0);
    let vx = data.train_x.select(Axis(0), &held);
    let vy = data.train_y.select(Axis(0), &held);
    let model = registry.train(
        name,
        &TrainData::new(&data.train_x, &data.train_y, &vx, &vy),
    )?;
    let train_pred = model.predict(data.train_x.view())?;
    let test_pred = model.predict(data.test_x.view())?;
    let report = make_report(data, &train_pred, &test_pred)?;
    Ok((report, scatter_points(data, &test_pred)))
}

fn run_reduced_setting(
    config: &RunConfig,
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
    art: &MlpArtifacts,
) -> Result<(SettingRun, ReducedSetting)> {
    let setting = art.data.setting;
    let (importance, sensor_names) = rank_sensors(config, art)?;
    let k = config.top_k.min(importance.scores.len());
    let selected_local = attribution::select_top_k(&importance, k)?;
    let selected: Vec<String> = selected_local
        .iter()
        .map(|&j| sensor_names[j].clone())
        .collect();

    let cols = reduced_columns(&art.data, &selected_local);
    let data = prepare(table, row_of, setting, &cols, config)?;
    let registry = tree_registry(config, setting);

    let mut per_model: Vec<(String, MetricsReport)> = Vec::new();
    let mut best: Option<(String, MetricsReport, Vec<ScatterPoint>)> = None;
    for name in REDUCED_FAMILIES {
        let (report, scatter) = eval_tree(&registry, name, &data)?;
        if best
            .as_ref()
            .is_none_or(|(_, b, _)| report.test_r2 > b.test_r2)
        {
            best = Some((name.to_string(), report.clone(), scatter));
        }
        per_model.push((name.to_string(), report));
    }
    let (best_model, report, scatter) = best.expect("three families evaluated");

    Ok((
        SettingRun {
            setting,
            report,
            scatter,
        },
        ReducedSetting {
            setting,
            importance,
            sensor_names,
            selected,
            selected_cols: cols,
            per_model,
            best_model,
        },
    ))
}

/// Feature-reduction experiment: Shapley-ranked top-k sensor features plus
/// the parameter block, retrained with DT/RF/ET.
pub fn run_reduced(config: &RunConfig, full: &FullRun) -> Result<ReducedRun> {
    config.validate()?;
    let table = build_feature_table(config)?;
    let row_of = index_rows(&table)?;
    run_reduced_on(config, &table, &row_of, full)
}

fn run_reduced_on(
    config: &RunConfig,
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
    full: &FullRun,
) -> Result<ReducedRun> {
    let outcomes: Vec<(SettingRun, ReducedSetting)> = full
        .artifacts
        .par_iter()
        .map(|(s, art)| {
            run_reduced_setting(config, table, row_of, art).map_err(|e| with_setting(e, *s))
        })
        .collect::<Result<_>>()?;
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut settings = Vec::with_capacity(outcomes.len());
    for (run, red) in outcomes {
        runs.push(run);
        settings.push(red);
    }
    Ok(ReducedRun {
        table: ResultsTable {
            experiment: ExperimentKind::Reduced,
            rows: runs.iter().map(|r| r.report.clone()).collect(),
        },
        runs,
        settings,
    })
}

/// Runs the requested experiments over one shared feature table and split.
///
/// `reduced` runs the full experiment inline when needed; the computed full
/// run is kept in the outputs either way.
pub fn run(config: &RunConfig, kinds: &[ExperimentKind]) -> Result<RunOutputs> {
    config.validate()?;
    let table = build_feature_table(config)?;
    let row_of = index_rows(&table)?;
    run_on(config, kinds, &table, &row_of)
}

fn run_on(
    config: &RunConfig,
    kinds: &[ExperimentKind],
    table: &FeatureTable,
    row_of: &BTreeMap<SampleRef, usize>,
) -> Result<RunOutputs> {
    if kinds.is_empty() {
        return Err(Error::validation("at least one experiment is required"));
    }
    let requested: BTreeSet<ExperimentKind> = kinds.iter().copied().collect();
    let kinds: Vec<ExperimentKind> = ExperimentKind::ALL
        .iter()
        .copied()
        .filter(|k| requested.contains(k))
        .collect();

    let mut outputs = RunOutputs {
        config: config.clone(),
        kinds: kinds.clone(),
        params_only: None,
        full: None,
        reduced: None,
        ablation: None,
    };
    if requested.contains(&ExperimentKind::ParamsOnly) {
        outputs.params_only = Some(run_params_only_on(config, table, row_of)?);
    }
    if requested.contains(&ExperimentKind::ParamsPlusSensors)
        || requested.contains(&ExperimentKind::Reduced)
    {
        let full = run_full_on(config, table, row_of)?;
        if requested.contains(&ExperimentKind::Reduced) {
            outputs.reduced = Some(run_reduced_on(config, table, row_of, &full)?);
        }
        outputs.full = Some(full);
    }
    Ok(outputs)
}

/// Ablation study: for each k in `config.ablation_ks`, retrains the ET on
/// the top-k sensor features of each setting and records test metrics.
/// Grid points beyond the sensor count are dropped.
pub fn ablate(config: &RunConfig) -> Result<RunOutputs> {
    config.validate()?;
    let table = build_feature_table(config)?;
    let row_of = index_rows(&table)?;

    let n_sensor = table.columns.len() - FeatureTable::N_PARAMS;
    let ks: Vec<usize> = config
        .ablation_ks
        .iter()
        .copied()
        .filter(|&k| k <= n_sensor)
        .collect();
    if ks.is_empty() {
        return Err(Error::validation(format!(
            "no ablation k within the {n_sensor} available sensor features"
        )));
    }

    let mut outputs = run_on(config, &[ExperimentKind::Reduced], &table, &row_of)?;
    let full = outputs.full.as_ref().expect("reduced run computed full");
    let reduced = outputs.reduced.as_ref().expect("reduced experiment ran");
    let curves: Vec<(Setting, Vec<AblationPoint>)> = full
        .artifacts
        .par_iter()
        .zip(reduced.settings.par_iter())
        .map(|((setting, art), red)| {
            let retrain = |selected_local: &[usize]| -> Result<(f64, f64)> {
                let cols = reduced_columns(&art.data, selected_local);
                let data = prepare(&table, &row_of, *setting, &cols, config)?;
                let registry = tree_registry(config, *setting);
                let (report, _) = eval_tree(&registry, "et", &data)?;
                Ok((report.test_r2, report.test_rmse))
            };
            let points = attribution::ablation_sweep(&ks, &red.importance, retrain)
                .map_err(|e| with_setting(e, *setting))?;
            Ok((*setting, points))
        })
        .collect::<Result<_>>()?;
    outputs.ablation = Some(curves);
    Ok(outputs)
}
