//! Hyperparameter optimization with a tree-structured Parzen estimator.
//!
//! A study is a sequential suggest→evaluate loop. Before `n_startup`
//! completed trials, suggestions are random draws from the search space.
//! After that, completed trials are split by objective into a good set D_l
//! (the best ⌈γ·n⌉) and the rest D_g; per-parameter kernel densities l(·)
//! and g(·) are fitted, `n_candidates` parameter sets are drawn from l, and
//! the candidate maximizing Σ [log l(x) − log g(x)] is suggested.
//!
//! Numeric kernels are Gaussian with Scott's-rule bandwidth (σ·m^{−1/5})
//! floored at 1e−3 of the parameter range, computed in log space for
//! log-uniform parameters; integers are treated as continuous and rounded;
//! categorical densities are add-one-smoothed category frequencies. The
//! conditional rule `n_hidden` gates `width_i` (active iff i < n_hidden);
//! inactive parameters are absent from the draw and contribute no score.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpArchitecture, Optimizer, TrainConfig};
use crate::rng;

const STUDY_DOMAIN: u64 = 0x48504f_53;

/// Name of the architecture-depth parameter that gates `width_i` specs.
pub const N_HIDDEN: &str = "n_hidden";
const WIDTH_PREFIX: &str = "width_";

/// A sampled hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Str(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// Assignment of values to (active) parameters, ordered by name.
pub type ParamMap = BTreeMap<String, ParamValue>;

/// Distribution of one search dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamKind {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    IntUniform { lo: i64, hi: i64 },
    /// Integer sampled uniformly in log space, then rounded.
    IntLogUniform { lo: i64, hi: i64 },
    Categorical { options: Vec<String> },
}

impl ParamKind {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamKind::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ParamKind::LogUniform { lo, hi } => {
                lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo < hi
            }
            ParamKind::IntUniform { lo, hi } => lo < hi,
            ParamKind::IntLogUniform { lo, hi } => *lo >= 1 && lo < hi,
            ParamKind::Categorical { options } => {
                !options.is_empty() && options.iter().collect::<BTreeSet<_>>().len() == options.len()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("parameter `{name}` has an invalid range")))
        }
    }

    /// Bounds of the working space the KDE operates in (log space for the
    /// log kinds, the plain range otherwise).
    fn working_bounds(&self) -> (f64, f64) {
        match self {
            ParamKind::Uniform { lo, hi } => (*lo, *hi),
            ParamKind::LogUniform { lo, hi } => (lo.ln(), hi.ln()),
            ParamKind::IntUniform { lo, hi } => (*lo as f64, *hi as f64),
            ParamKind::IntLogUniform { lo, hi } => ((*lo as f64).ln(), (*hi as f64).ln()),
            ParamKind::Categorical { .. } => (0.0, 0.0),
        }
    }

    fn to_working(&self, value: &ParamValue) -> Option<f64> {
        let v = value.as_f64()?;
        match self {
            ParamKind::Uniform { .. } | ParamKind::IntUniform { .. } => Some(v),
            ParamKind::LogUniform { .. } | ParamKind::IntLogUniform { .. } => Some(v.ln()),
            ParamKind::Categorical { .. } => None,
        }
    }

    /// Maps a working-space draw back to a parameter value, clipping to the
    /// spec bounds and rounding integer kinds.
    fn from_working(&self, z: f64) -> ParamValue {
        let (wlo, whi) = self.working_bounds();
        let z = z.clamp(wlo, whi);
        match self {
            ParamKind::Uniform { lo, hi } => ParamValue::Float(z.clamp(*lo, *hi)),
            ParamKind::LogUniform { lo, hi } => ParamValue::Float(z.exp().clamp(*lo, *hi)),
            ParamKind::IntUniform { lo, hi } => {
                ParamValue::Int((z.round() as i64).clamp(*lo, *hi))
            }
            ParamKind::IntLogUniform { lo, hi } => {
                ParamValue::Int((z.exp().round() as i64).clamp(*lo, *hi))
            }
            ParamKind::Categorical { .. } => unreachable!("categorical has no working space"),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> ParamValue {
        match self {
            ParamKind::Uniform { lo, hi } => ParamValue::Float(rng.gen_range(*lo..*hi)),
            ParamKind::LogUniform { lo, hi } => {
                ParamValue::Float(rng.gen_range(lo.ln()..hi.ln()).exp().clamp(*lo, *hi))
            }
            ParamKind::IntUniform { lo, hi } => ParamValue::Int(rng.gen_range(*lo..=*hi)),
            ParamKind::IntLogUniform { lo, hi } => {
                let z = rng.gen_range((*lo as f64).ln()..(*hi as f64).ln());
                ParamValue::Int((z.exp().round() as i64).clamp(*lo, *hi))
            }
            ParamKind::Categorical { options } => {
                ParamValue::Str(options[rng.gen_range(0..options.len())].clone())
            }
        }
    }
}

/// One search dimension: a name plus its distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
        }
    }
}

/// Ordered list of parameter specs with the `n_hidden`/`width_i` gating rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub specs: Vec<ParamSpec>,
}

/// Index gated by `n_hidden`, if the name matches `width_<i>`.
fn width_index(name: &str) -> Option<i64> {
    name.strip_prefix(WIDTH_PREFIX)?.parse().ok()
}

impl SearchSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Result<Self> {
        let space = SearchSpace { specs };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.is_empty() {
            return Err(Error::validation("search space has no parameters"));
        }
        let mut seen = BTreeSet::new();
        let mut gate_position = None;
        for (i, spec) in self.specs.iter().enumerate() {
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate parameter name `{}`",
                    spec.name
                )));
            }
            spec.kind.validate(&spec.name)?;
            if spec.name == N_HIDDEN {
                if !matches!(
                    spec.kind,
                    ParamKind::IntUniform { .. } | ParamKind::IntLogUniform { .. }
                ) {
                    return Err(Error::validation(format!("`{N_HIDDEN}` must be an integer parameter")));
                }
                gate_position = Some(i);
            }
        }
        if seen.contains(N_HIDDEN) {
            for (i, spec) in self.specs.iter().enumerate() {
                if width_index(&spec.name).is_some() && i < gate_position.unwrap() {
                    return Err(Error::validation(format!(
                        "`{}` is gated by `{N_HIDDEN}` and must come after it",
                        spec.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether a spec is active given the parameters drawn so far. A
    /// `width_i` spec is active iff i < n_hidden; everything else always is.
    /// Spaces without an `n_hidden` spec have no gating.
    fn is_active(&self, spec: &ParamSpec, partial: &ParamMap) -> bool {
        if !self.specs.iter().any(|s| s.name == N_HIDDEN) {
            return true;
        }
        match width_index(&spec.name) {
            None => true,
            Some(i) => partial
                .get(N_HIDDEN)
                .and_then(ParamValue::as_i64)
                .is_some_and(|n| i < n),
        }
    }
}

/// Outcome of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Complete,
    Failed,
}

/// One evaluated point of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: usize,
    pub params: ParamMap,
    pub objective: Option<f64>,
    pub status: TrialStatus,
}

/// TPE sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_startup: 10,
            gamma: 0.25,
            n_candidates: 24,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup < 1 {
            return Err(Error::validation("n_startup must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation("gamma must lie in (0, 1)"));
        }
        if self.n_candidates < 1 {
            return Err(Error::validation("n_candidates must be at least 1"));
        }
        Ok(())
    }
}

/// Draws one parameter set uniformly from the space, in spec order, skipping
/// gated-off parameters.
pub fn sample_random(space: &SearchSpace, rng: &mut ChaCha8Rng) -> ParamMap {
    let mut params = ParamMap::new();
    for spec in &space.specs {
        if space.is_active(spec, &params) {
            params.insert(spec.name.clone(), spec.kind.sample(rng));
        }
    }
    params
}

/// Kernel density estimate for one parameter, fitted to one trial set.
#[derive(Debug, Clone)]
enum Density {
    /// Gaussian mixture in the working space; empty points fall back to the
    /// uniform prior over the working range.
    Numeric {
        points: Vec<f64>,
        bandwidth: f64,
        lo: f64,
        hi: f64,
    },
    /// Add-one-smoothed category frequencies, aligned with the
    /// [`ParamKind::Categorical`] options.
    Categorical { probs: Vec<f64> },
}

const SQRT_TAU: f64 = 2.5066282746310002; // √(2π)

impl Density {
    /// Fits a density to one side of the split. `scale` is the working-space
    /// standard deviation of the parameter over all completed trials; using
    /// the pooled scale in Scott's rule keeps the good-side kernels wide
    /// enough to keep exploring once the top quantile concentrates.
    fn fit(spec: &ParamSpec, trials: &[&Trial], scale: f64) -> Density {
        match &spec.kind {
            ParamKind::Categorical { options } => {
                let mut counts = vec![1.0; options.len()];
                let mut total = options.len() as f64;
                for trial in trials {
                    if let Some(ParamValue::Str(s)) = trial.params.get(&spec.name) {
                        if let Some(i) = options.iter().position(|o| o == s) {
                            counts[i] += 1.0;
                            total += 1.0;
                        }
                    }
                }
                Density::Categorical {
                    probs: counts.into_iter().map(|c| c / total).collect(),
                }
            }
            kind => {
                let (lo, hi) = kind.working_bounds();
                let points: Vec<f64> = trials
                    .iter()
                    .filter_map(|t| t.params.get(&spec.name))
                    .filter_map(|v| kind.to_working(v))
                    .collect();
                let m = points.len();
                let floor = 1e-3 * (hi - lo);
                let bandwidth = if m == 0 {
                    floor
                } else {
                    (scale * (m as f64).powf(-0.2)).max(floor)
                };
                Density::Numeric {
                    points,
                    bandwidth,
                    lo,
                    hi,
                }
            }
        }
    }

    fn log_pdf(&self, spec: &ParamSpec, value: &ParamValue) -> f64 {
        let pdf = match self {
            Density::Categorical { probs } => {
                let ParamKind::Categorical { options } = &spec.kind else {
                    return f64::NEG_INFINITY;
                };
                value
                    .as_str()
                    .and_then(|s| options.iter().position(|o| o == s))
                    .map_or(0.0, |i| probs[i])
            }
            Density::Numeric {
                points,
                bandwidth,
                lo,
                hi,
            } => {
                let Some(z) = spec.kind.to_working(value) else {
                    return f64::NEG_INFINITY;
                };
                if points.is_empty() {
                    1.0 / (hi - lo)
                } else {
                    let mut total = 0.0;
                    for p in points {
                        let u = (z - p) / bandwidth;
                        total += (-0.5 * u * u).exp() / (bandwidth * SQRT_TAU);
                    }
                    total / points.len() as f64
                }
            }
        };
        pdf.max(f64::MIN_POSITIVE).ln()
    }

    fn sample(&self, spec: &ParamSpec, rng: &mut ChaCha8Rng) -> ParamValue {
        match self {
            Density::Categorical { probs } => {
                let ParamKind::Categorical { options } = &spec.kind else {
                    unreachable!("categorical density over non-categorical spec")
                };
                let draw: f64 = rng.gen_range(0.0..1.0);
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        return ParamValue::Str(options[i].clone());
                    }
                }
                ParamValue::Str(options.last().expect("options non-empty").clone())
            }
            Density::Numeric { points, bandwidth, lo, hi } => {
                if points.is_empty() {
                    return spec.kind.from_working(rng.gen_range(*lo..*hi));
                }
                let center = points[rng.gen_range(0..points.len())];
                let noise: f64 = rng.sample(StandardNormal);
                spec.kind.from_working(center + bandwidth * noise)
            }
        }
    }
}

/// Working-space standard deviation of a parameter over every completed
/// trial (both sides of the split) where it was active.
fn pooled_scale(spec: &ParamSpec, d_l: &[&Trial], d_g: &[&Trial]) -> f64 {
    let values: Vec<f64> = d_l
        .iter()
        .chain(d_g.iter())
        .filter_map(|t| t.params.get(&spec.name))
        .filter_map(|v| spec.kind.to_working(v))
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Per-parameter good/rest densities fitted from a trial history split.
struct TpeModel<'a> {
    space: &'a SearchSpace,
    densities: Vec<(Density, Density)>,
}

impl<'a> TpeModel<'a> {
    fn build(space: &'a SearchSpace, d_l: &[&Trial], d_g: &[&Trial]) -> Self {
        let densities = space
            .specs
            .iter()
            .map(|spec| {
                let scale = pooled_scale(spec, d_l, d_g);
                (
                    Density::fit(spec, d_l, scale),
                    Density::fit(spec, d_g, scale),
                )
            })
            .collect();
        TpeModel { space, densities }
    }

    /// Draws one full parameter set from the good densities, honoring gating.
    fn sample(&self, rng: &mut ChaCha8Rng) -> ParamMap {
        let mut params = ParamMap::new();
        for (spec, (l, _)) in self.space.specs.iter().zip(&self.densities) {
            if self.space.is_active(spec, &params) {
                params.insert(spec.name.clone(), l.sample(spec, rng));
            }
        }
        params
    }

    /// Σ over present parameters of log l(x) − log g(x).
    fn score(&self, params: &ParamMap) -> f64 {
        let mut total = 0.0;
        for (spec, (l, g)) in self.space.specs.iter().zip(&self.densities) {
            if let Some(value) = params.get(&spec.name) {
                total += l.log_pdf(spec, value) - g.log_pdf(spec, value);
            }
        }
        total
    }
}

/// Sorts completed trials by objective (ties by trial id) and splits off the
/// best ⌈γ·n⌉ as D_l. Returns None when either side would be empty.
fn split_history<'h>(
    history: &'h [Trial],
    gamma: f64,
) -> Option<(Vec<&'h Trial>, Vec<&'h Trial>)> {
    let mut complete: Vec<&Trial> = history
        .iter()
        .filter(|t| t.status == TrialStatus::Complete && t.objective.is_some())
        .collect();
    complete.sort_by(|a, b| {
        a.objective
            .partial_cmp(&b.objective)
            .expect("finite objectives")
            .then(a.trial_id.cmp(&b.trial_id))
    });
    let n = complete.len();
    let n_best = ((gamma * n as f64).ceil() as usize).clamp(1, n);
    if n_best >= n {
        return None;
    }
    let d_g = complete.split_off(n_best);
    Some((complete, d_g))
}

/// Suggests the next parameter set: random during startup, TPE afterwards.
pub fn suggest(
    history: &[Trial],
    space: &SearchSpace,
    config: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ParamMap> {
    space.validate()?;
    config.validate()?;
    let n_complete = history
        .iter()
        .filter(|t| t.status == TrialStatus::Complete)
        .count();
    if n_complete < config.n_startup {
        return Ok(sample_random(space, rng));
    }
    let Some((d_l, d_g)) = split_history(history, config.gamma) else {
        return Ok(sample_random(space, rng));
    };
    let model = TpeModel::build(space, &d_l, &d_g);
    let mut best: Option<(ParamMap, f64)> = None;
    for _ in 0..config.n_candidates {
        let candidate = model.sample(rng);
        let score = model.score(&candidate);
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((candidate, score));
        }
    }
    Ok(best.expect("n_candidates >= 1").0)
}

/// Runs a sequential study. Failed evaluations are recorded and skipped by
/// the density builder; the best trial has the minimal objective.
pub fn run_study<F>(
    mut objective: F,
    space: &SearchSpace,
    n_trials: usize,
    config: &TpeConfig,
) -> Result<(Trial, Vec<Trial>)>
where
    F: FnMut(&ParamMap) -> Result<f64>,
{
    if n_trials < 1 {
        return Err(Error::validation("n_trials must be at least 1"));
    }
    space.validate()?;
    config.validate()?;
    let mut stream = rng::stream(config.seed, &[STUDY_DOMAIN]);
    let mut history: Vec<Trial> = Vec::with_capacity(n_trials);
    for trial_id in 0..n_trials {
        let params = suggest(&history, space, config, &mut stream)?;
        let trial = match objective(&params) {
            Ok(value) if value.is_finite() => Trial {
                trial_id,
                params,
                objective: Some(value),
                status: TrialStatus::Complete,
            },
            _ => Trial {
                trial_id,
                params,
                objective: None,
                status: TrialStatus::Failed,
            },
        };
        history.push(trial);
    }
    let best = history
        .iter()
        .filter(|t| t.status == TrialStatus::Complete)
        .min_by(|a, b| {
            a.objective
                .partial_cmp(&b.objective)
                .expect("finite objectives")
                .then(a.trial_id.cmp(&b.trial_id))
        })
        .cloned()
        .ok_or(Error::StudyFailed { n_trials })?;
    Ok((best, history))
}

/// Appends nothing; writes the whole study as JSON lines, one trial each.
pub fn save_history(path: &Path, history: &[Trial]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for trial in history {
        let line = serde_json::to_string(trial)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_history(path: &Path) -> Result<Vec<Trial>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut history = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let trial: Trial = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("{} line {}: {e}", path.display(), i + 1)))?;
        history.push(trial);
    }
    Ok(history)
}

/// Default MLP search space: learning rate, batch size, L1/L2 penalties,
/// depth 0–3 with log-sampled widths 2–512, optimizer, and activation.
pub fn default_mlp_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::new("learning_rate", ParamKind::LogUniform { lo: 1e-5, hi: 1e-1 }),
        ParamSpec::new(
            "batch_size",
            ParamKind::Categorical {
                options: ["8", "16", "32", "64", "128"].map(String::from).to_vec(),
            },
        ),
        ParamSpec::new("l1", ParamKind::LogUniform { lo: 1e-8, hi: 1e-2 }),
        ParamSpec::new("l2", ParamKind::LogUniform { lo: 1e-8, hi: 1e-2 }),
        ParamSpec::new(N_HIDDEN, ParamKind::IntUniform { lo: 0, hi: 3 }),
        ParamSpec::new("width_0", ParamKind::IntLogUniform { lo: 2, hi: 512 }),
        ParamSpec::new("width_1", ParamKind::IntLogUniform { lo: 2, hi: 512 }),
        ParamSpec::new("width_2", ParamKind::IntLogUniform { lo: 2, hi: 512 }),
        ParamSpec::new(
            "optimizer",
            ParamKind::Categorical {
                options: Optimizer::ALL.iter().map(|o| o.as_str().to_string()).collect(),
            },
        ),
        ParamSpec::new(
            "activation",
            ParamKind::Categorical {
                options: Activation::ALL.iter().map(|a| a.as_str().to_string()).collect(),
            },
        ),
    ])
    .expect("default space is valid")
}

fn require<'p>(params: &'p ParamMap, name: &str) -> Result<&'p ParamValue> {
    params
        .get(name)
        .ok_or_else(|| Error::validation(format!("missing parameter `{name}`")))
}

fn require_f64(params: &ParamMap, name: &str) -> Result<f64> {
    require(params, name)?
        .as_f64()
        .ok_or_else(|| Error::validation(format!("parameter `{name}` is not numeric")))
}

fn require_i64(params: &ParamMap, name: &str) -> Result<i64> {
    require(params, name)?
        .as_i64()
        .ok_or_else(|| Error::validation(format!("parameter `{name}` is not an integer")))
}

fn require_str<'p>(params: &'p ParamMap, name: &str) -> Result<&'p str> {
    require(params, name)?
        .as_str()
        .ok_or_else(|| Error::validation(format!("parameter `{name}` is not a string")))
}

/// Translates a draw from [`default_mlp_space`] into an architecture and
/// training configuration. Epoch budget, patience, and seed keep the
/// `TrainConfig` defaults; callers override them as needed.
pub fn mlp_settings_from_params(
    params: &ParamMap,
    input_dim: usize,
) -> Result<(MlpArchitecture, TrainConfig)> {
    let n_hidden = require_i64(params, N_HIDDEN)?;
    if !(0..=8).contains(&n_hidden) {
        return Err(Error::validation(format!("n_hidden {n_hidden} out of range")));
    }
    let mut hidden_widths = Vec::new();
    for i in 0..n_hidden {
        let width = require_i64(params, &format!("{WIDTH_PREFIX}{i}"))?;
        if width < 1 {
            return Err(Error::validation(format!("width_{i} must be positive")));
        }
        hidden_widths.push(width as usize);
    }
    let arch = MlpArchitecture {
        input_dim,
        hidden_widths,
        activation: Activation::parse(require_str(params, "activation")?)?,
    };
    arch.validate()?;
    let batch_size: usize = require_str(params, "batch_size")?
        .parse()
        .map_err(|_| Error::validation("batch_size is not an integer"))?;
    let config = TrainConfig {
        learning_rate: require_f64(params, "learning_rate")?,
        batch_size,
        l1: require_f64(params, "l1")?,
        l2: require_f64(params, "l2")?,
        optimizer: Optimizer::parse(require_str(params, "optimizer")?)?,
        ..TrainConfig::default()
    };
    config.validate()?;
    Ok((arch, config))
}
