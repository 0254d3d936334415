//! Report emission: result tables, scatter data, importance rankings,
//! persisted models, study logs, and the run manifest.
//!
//! Every file is written by exactly one call, contents are derived only from
//! the (deterministic) run outputs, and floats use the round-trip formatter,
//! so a repeated run produces byte-identical files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    ExperimentKind, MlpArtifacts, MlpChoice, ReducedSetting, ResultsTable, RunConfig, RunOutputs,
    ScatterPoint, Setting, SettingRun, StudyLog,
};
use crate::dataset::fmt_float;
use crate::error::{Error, Result};
use crate::features;
use crate::hpo;
use crate::metrics::MetricsReport;
use crate::mlp::MlpModel;
use crate::preprocess::NormalizationStats;

/// File name of the manifest inside an output directory.
pub const MANIFEST_NAME: &str = "run_manifest.json";

/// Self-describing record of a run: tool identity, feature catalog, the
/// experiments that produced the outputs, and the exact configuration.
/// Re-running from a manifest reproduces every output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// Identity of the feature catalog the inputs were extracted with.
    pub catalog_id: String,
    pub experiments: Vec<ExperimentKind>,
    /// Whether the run swept the ablation grid.
    #[serde(default)]
    pub ablation: bool,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(config: &RunConfig, experiments: &[ExperimentKind], ablation: bool) -> Self {
        RunManifest {
            manifest_version: 1,
            tool: "roughcast".to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            catalog_id: features::catalog_id(config.bands),
            experiments: experiments.to_vec(),
            ablation,
            config: config.clone(),
        }
    }
}

/// Reads a manifest written by [`emit_reports`].
pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<RunManifest>(&text)
        .map_err(|e| Error::format(format!("{}: not a run manifest: {e}", path.display())))
}

/// Re-executes the run a manifest records; with the manifest unchanged the
/// outputs are byte-identical to the original emission.
pub fn rerun(manifest: &RunManifest) -> Result<RunOutputs> {
    let expected = features::catalog_id(manifest.config.bands);
    if manifest.catalog_id != expected {
        return Err(Error::format(format!(
            "manifest catalog `{}` does not match this tool's `{expected}`",
            manifest.catalog_id
        )));
    }
    if manifest.ablation {
        super::ablate(&manifest.config)
    } else {
        super::run(&manifest.config, &manifest.experiments)
    }
}

/// Saved MLP of one experiment-setting, self-contained: input normalization
/// travels inside the model, target normalization alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedMlp {
    pub format_version: u32,
    pub experiment: ExperimentKind,
    pub setting: Setting,
    pub choice: MlpChoice,
    pub model: MlpModel,
    pub target_stats: Option<NormalizationStats>,
}

impl PersistedMlp {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("serializing model: {e}")))?;
        write_text(path, &json)
    }

    pub fn load(path: &Path) -> Result<PersistedMlp> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let saved: PersistedMlp = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        if saved.format_version != 1 {
            return Err(Error::format(format!(
                "{}: unsupported model format version {}",
                path.display(),
                saved.format_version
            )));
        }
        Ok(saved)
    }
}

/// Reads a [`RunConfig`] from either a bare config file or a manifest
/// written by [`emit_reports`]. Manifests are recognized first — a manifest
/// would otherwise parse as an (all-default) bare config.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(manifest) = serde_json::from_str::<RunManifest>(&text) {
        return Ok(manifest.config);
    }
    serde_json::from_str::<RunConfig>(&text)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `Setting,Train R2,Test R2,Train RMSE,Test RMSE` with full-precision floats.
fn table_csv(table: &ResultsTable) -> String {
    let mut out = String::from("Setting,Train R2,Test R2,Train RMSE,Test RMSE\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{} {},{},{},{},{}\n",
            row.label,
            row.setting,
            fmt_float(row.train_r2),
            fmt_float(row.test_r2),
            fmt_float(row.train_rmse),
            fmt_float(row.test_rmse),
        ));
    }
    out
}

/// Markdown rendering of a results table, 4 decimal places.
fn table_md(table: &ResultsTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Results: {}\n\n", table.experiment.as_str()));
    out.push_str("| Setting | Train R2 | Test R2 | Train RMSE | Test RMSE |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &table.rows {
        out.push_str(&format!(
            "| {} {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
            row.label, row.setting, row.train_r2, row.test_r2, row.train_rmse, row.test_rmse,
        ));
    }
    out
}

/// `sample_id,ground_truth,prediction`; ids are `experiment_id/sample_id`.
fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("sample_id,ground_truth,prediction\n");
    for p in points {
        out.push_str(&format!(
            "{}/{},{},{}\n",
            p.id.experiment_id,
            p.id.sample_id,
            fmt_float(p.ground_truth),
            fmt_float(p.prediction),
        ));
    }
    out
}

/// `rank,feature_name,mean_abs_shap` over the full sensor ranking.
fn importance_csv(red: &ReducedSetting) -> String {
    let mut out = String::from("rank,feature_name,mean_abs_shap\n");
    for (rank, &j) in red.importance.ranking.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            rank + 1,
            red.sensor_names[j],
            fmt_float(red.importance.scores[j]),
        ));
    }
    out
}

/// `k,technique,test_r2,test_rmse`, setting-major.
fn ablation_csv(curves: &[(Setting, Vec<crate::attribution::AblationPoint>)]) -> String {
    let mut out = String::from("k,technique,test_r2,test_rmse\n");
    for (setting, points) in curves {
        for p in points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.k,
                setting.as_str(),
                fmt_float(p.test_r2),
                fmt_float(p.test_rmse),
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct ReducedModelEntry<'a> {
    model: &'a str,
    metrics: &'a MetricsReport,
}

#[derive(Serialize)]
struct ReducedSettingDoc<'a> {
    setting: &'a str,
    label: &'a str,
    best_model: &'a str,
    selected_features: &'a [String],
    models: Vec<ReducedModelEntry<'a>>,
}

fn reduced_models_json(settings: &[ReducedSetting]) -> Result<String> {
    let docs: Vec<ReducedSettingDoc<'_>> = settings
        .iter()
        .map(|red| ReducedSettingDoc {
            setting: red.setting.as_str(),
            label: red.setting.label(),
            best_model: &red.best_model,
            selected_features: &red.selected,
            models: red
                .per_model
                .iter()
                .map(|(name, metrics)| ReducedModelEntry { model: name, metrics })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&docs)
        .map_err(|e| Error::format(format!("serializing reduced models: {e}")))
}

/// Minimal standalone scatter plot (ground truth on x, prediction on y,
/// identity diagonal) for quick visual inspection.
pub fn scatter_svg(points: &[ScatterPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::validation("no scatter points to plot"));
    }
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 48.0;
    let values = points
        .iter()
        .flat_map(|p| [p.ground_truth, p.prediction])
        .collect::<Vec<f64>>();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::validation("non-finite scatter values"));
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    let scale = (SIZE - 2.0 * MARGIN) / (hi - lo);
    let x_of = |v: f64| MARGIN + (v - lo) * scale;
    let y_of = |v: f64| SIZE - MARGIN - (v - lo) * scale;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" \
         viewBox=\"0 0 {s} {s}\">\n",
        s = SIZE
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n",
        s = SIZE
    ));
    svg.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
        x_of(lo),
        y_of(lo),
        x_of(hi),
        y_of(hi)
    ));
    for p in points {
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\" \
             fill-opacity=\"0.7\"/>\n",
            x_of(p.ground_truth),
            y_of(p.prediction)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"middle\" \
         font-family=\"sans-serif\" font-size=\"13\">ground truth roughness</text>\n",
        SIZE / 2.0,
        SIZE - 10.0
    ));
    svg.push_str(&format!(
        "  <text x=\"14\" y=\"{:.0}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 14 {:.0})\">predicted roughness</text>\n",
        SIZE / 2.0,
        SIZE / 2.0
    ));
    svg.push_str("</svg>\n");
    write_text(path, &svg)
}

/// Scatter source per setting, best model first: the full-input MLP when it
/// ran, otherwise the reduced best tree, otherwise the params-only MLP.
pub fn scatter_runs(outputs: &RunOutputs) -> Vec<&SettingRun> {
    let mut seen: BTreeSet<Setting> = BTreeSet::new();
    let mut sources: Vec<&SettingRun> = Vec::new();
    for runs in [
        outputs.full.as_ref().map(|f| f.runs.as_slice()),
        outputs.reduced.as_ref().map(|r| r.runs.as_slice()),
        outputs.params_only.as_ref().map(|p| p.runs.as_slice()),
    ]
    .into_iter()
    .flatten()
    {
        for run in runs {
            if seen.insert(run.setting) {
                sources.push(run);
            }
        }
    }
    sources.sort_by_key(|r| r.setting);
    sources
}

/// Importance ranking shown as the headline `importance.csv`: the combined
/// setting when it ran, otherwise the first in (a)–(f) order.
fn headline_importance(settings: &[ReducedSetting]) -> Option<&ReducedSetting> {
    settings
        .iter()
        .find(|r| r.setting == Setting::Combined)
        .or_else(|| settings.first())
}

fn mlp_model_docs(
    kind: ExperimentKind,
    artifacts: &[(Setting, MlpArtifacts)],
) -> Vec<(String, PersistedMlp, Option<&StudyLog>)> {
    artifacts
        .iter()
        .map(|(setting, art)| {
            let mut model = art.model.clone();
            model.stats = Some(art.data.stats.clone());
            let doc = PersistedMlp {
                format_version: 1,
                experiment: kind,
                setting: *setting,
                choice: art.choice.clone(),
                model,
                target_stats: art.target_stats.clone(),
            };
            let stem = format!("{}_{}", kind.as_str(), setting.as_str());
            (stem, doc, art.history.as_ref())
        })
        .collect()
}

/// Writes every report of a run into `out_dir` and returns the paths, the
/// manifest last. See the module docs for the file inventory.
pub fn emit_reports(outputs: &RunOutputs, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let emit = |name: String, text: String, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
        Ok(())
    };

    // Result tables, one pair per computed experiment.
    let tables: Vec<&ResultsTable> = [
        outputs.params_only.as_ref().map(|p| &p.table),
        outputs.full.as_ref().map(|f| &f.table),
        outputs.reduced.as_ref().map(|r| &r.table),
    ]
    .into_iter()
    .flatten()
    .collect();
    for table in &tables {
        let stem = table.experiment.as_str();
        emit(format!("table_{stem}.csv"), table_csv(table), &mut written)?;
        emit(format!("table_{stem}.md"), table_md(table), &mut written)?;
    }

    // Test-set scatter data per setting.
    for run in scatter_runs(outputs) {
        emit(
            format!("scatter_{}.csv", run.setting.as_str()),
            scatter_csv(&run.scatter),
            &mut written,
        )?;
    }

    // Feature-importance rankings.
    if let Some(reduced) = &outputs.reduced {
        if let Some(headline) = headline_importance(&reduced.settings) {
            emit("importance.csv".to_string(), importance_csv(headline), &mut written)?;
        }
        for red in &reduced.settings {
            emit(
                format!("importance_{}.csv", red.setting.as_str()),
                importance_csv(red),
                &mut written,
            )?;
        }
        emit(
            "reduced_models.json".to_string(),
            reduced_models_json(&reduced.settings)?,
            &mut written,
        )?;
    }

    // Trained MLPs and their study logs.
    let mut model_docs = Vec::new();
    if let Some(p) = &outputs.params_only {
        model_docs.extend(mlp_model_docs(ExperimentKind::ParamsOnly, &p.artifacts));
    }
    if let Some(f) = &outputs.full {
        model_docs.extend(mlp_model_docs(ExperimentKind::ParamsPlusSensors, &f.artifacts));
    }
    if !model_docs.is_empty() {
        let models_dir = out_dir.join("models");
        ensure_dir(&models_dir)?;
        for (stem, doc, study) in &model_docs {
            let path = models_dir.join(format!("mlp_{stem}.json"));
            doc.save(&path)?;
            written.push(path);
            if let Some(study) = study {
                let study_dir = out_dir.join("studies").join(stem);
                ensure_dir(&study_dir)?;
                let log_path = study_dir.join("history.jsonl");
                hpo::save_history(&log_path, &study.trials)?;
                written.push(log_path);
                let best_path = study_dir.join("best.json");
                let best = serde_json::to_string_pretty(&study.best)
                    .map_err(|e| Error::format(format!("serializing best trial: {e}")))?;
                write_text(&best_path, &best)?;
                written.push(best_path);
            }
        }
    }

    // Ablation curve.
    if let Some(curves) = &outputs.ablation {
        emit("ablation.csv".to_string(), ablation_csv(curves), &mut written)?;
    }

    // Manifest last: its presence marks a complete emission.
    let manifest = RunManifest::new(&outputs.config, &outputs.kinds, outputs.ablation.is_some());
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(format!("serializing manifest: {e}")))?;
    emit(MANIFEST_NAME.to_string(), json, &mut written)?;
    Ok(written)
}
