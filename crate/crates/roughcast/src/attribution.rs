//! Shapley-value feature attribution, global importance ranking, top-k
//! feature selection, and the ablation sweep.
//!
//! The value function of a coalition S is the mean model output over
//! background rows with the coordinates in S replaced by the explained
//! row's values. `shapley_exact` enumerates all 2^d coalitions (d ≤ 20);
//! `shapley_sampled` is the unbiased permutation estimator: for each seeded
//! permutation one background row is resampled and marginal contributions
//! are accumulated along the permutation order.
//!
//! Per-permutation RNG streams derive from (seed, row, permutation index)
//! and partial sums reduce in fixed block order, so attributions are
//! independent of thread count and scheduling.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::rng;

const SHAP_DOMAIN: u64 = 0x53484150;
const BACKGROUND_DOMAIN: u64 = 0x53484150_42;

/// Largest feature count for which exact enumeration is allowed.
pub const EXACT_LIMIT: usize = 20;

/// Permutations per explained row in sampled mode.
pub const DEFAULT_PERMUTATIONS: usize = 2000;

/// Background rows subsampled from the training set.
pub const DEFAULT_BACKGROUND_ROWS: usize = 100;

/// Permutations are summed sequentially within fixed-size blocks; blocks
/// combine in index order, keeping sums independent of thread count.
const PERMUTATION_BLOCK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMode {
    Exact,
    Sampled,
}

/// Settings for explaining a batch of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributionConfig {
    pub mode: AttributionMode,
    /// Permutations per row (sampled mode).
    pub permutations: usize,
    /// Background rows drawn from the reference set.
    pub background_rows: usize,
    pub seed: u64,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            mode: AttributionMode::Sampled,
            permutations: DEFAULT_PERMUTATIONS,
            background_rows: DEFAULT_BACKGROUND_ROWS,
            seed: 0,
        }
    }
}

impl AttributionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations < 1 {
            return Err(Error::validation("permutations must be at least 1"));
        }
        if self.background_rows < 1 {
            return Err(Error::validation("background_rows must be at least 1"));
        }
        Ok(())
    }
}

/// Draws `n_rows` distinct training rows (all of them if fewer exist) as the
/// attribution background, in ascending row order.
pub fn sample_background(train: ArrayView2<'_, f64>, n_rows: usize, seed: u64) -> Result<Array2<f64>> {
    if train.nrows() == 0 {
        return Err(Error::validation("background source has no rows"));
    }
    if n_rows == 0 {
        return Err(Error::validation("background size must be at least 1"));
    }
    let n = train.nrows();
    let k = n_rows.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut stream = rng::stream(seed, &[BACKGROUND_DOMAIN]);
    for i in 0..k {
        let j = stream.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    let mut out = Array2::zeros((k, train.ncols()));
    for (r, &i) in chosen.iter().enumerate() {
        out.row_mut(r).assign(&train.row(i));
    }
    Ok(out)
}

/// Per-row, per-feature φ values plus the background mean output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub base_value: f64,
    /// One row of φ per explained row, one column per feature.
    pub phi: Array2<f64>,
}

/// Mean |φ| per feature with a deterministic descending ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    /// Mean |φ| per feature, in feature order.
    pub scores: Vec<f64>,
    /// Feature indices sorted by score descending, ties by ascending index.
    pub ranking: Vec<usize>,
}

/// Model access for the permutation walk: either an opaque row predictor or
/// an MLP, which supports incremental first-layer updates when only one
/// coordinate changes between evaluations.
enum Predictor<'a> {
    Generic(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
    Mlp(&'a MlpModel),
}

enum WalkState {
    Plain,
    /// Cached first-layer pre-activations of the current working row.
    FirstLayer(Array1<f64>),
}

impl Predictor<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        match self {
            Predictor::Generic(f) => f(z),
            Predictor::Mlp(m) => m.predict_row(z).expect("validated dimensions"),
        }
    }

    fn begin(&self, z: &[f64]) -> (WalkState, f64) {
        match self {
            Predictor::Generic(f) => (WalkState::Plain, f(z)),
            Predictor::Mlp(m) => {
                let z1 = m.first_layer(z).expect("validated dimensions");
                let v = m.predict_from_first_layer(z1.view());
                (WalkState::FirstLayer(z1), v)
            }
        }
    }

    /// Value after coordinate `j` of the working row changed from `old` to
    /// its current value `z[j]`.
    fn step(&self, state: &mut WalkState, z: &[f64], j: usize, old: f64) -> f64 {
        match (self, state) {
            (Predictor::Mlp(m), WalkState::FirstLayer(z1)) => {
                let delta = z[j] - old;
                z1.scaled_add(delta, &m.first_layer_sensitivity(j));
                m.predict_from_first_layer(z1.view())
            }
            (p, _) => p.value(z),
        }
    }
}

fn check_explain_input(x: &[f64], background: ArrayView2<'_, f64>) -> Result<()> {
    if background.nrows() == 0 {
        return Err(Error::validation("background must be non-empty"));
    }
    if background.ncols() != x.len() {
        return Err(Error::validation(format!(
            "row has {} features, background has {}",
            x.len(),
            background.ncols()
        )));
    }
    Ok(())
}

/// Shapley weight 1/(d·C(d−1,s)) for a coalition of size s excluding i.
fn shapley_weight(d: usize, s: usize) -> f64 {
    let mut binom = 1.0;
    for t in 0..s {
        binom = binom * (d - 1 - t) as f64 / (t + 1) as f64;
    }
    1.0 / (d as f64 * binom)
}

fn exact_core(
    predictor: &Predictor<'_>,
    x: &[f64],
    background: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    check_explain_input(x, background)?;
    let d = x.len();
    if d > EXACT_LIMIT {
        return Err(Error::Capacity(format!(
            "exact attribution enumerates 2^d coalitions; d = {d} exceeds the limit of {EXACT_LIMIT}"
        )));
    }
    let n_bg = background.nrows() as f64;
    // v(S) for every coalition, indexed by bitmask.
    let table: Vec<f64> = (0u32..1 << d)
        .into_par_iter()
        .map(|mask| {
            let mut total = 0.0;
            let mut z = vec![0.0; d];
            for row in background.rows() {
                for j in 0..d {
                    z[j] = if mask & (1 << j) != 0 { x[j] } else { row[j] };
                }
                total += predictor.value(&z);
            }
            total / n_bg
        })
        .collect();
    let mut phi = vec![0.0; d];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0u32..1 << d {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                *phi_i += shapley_weight(d, s) * (table[(mask | bit) as usize] - table[mask as usize]);
            }
        }
    }
    Ok(phi)
}

/// Exact Shapley values by full coalition enumeration (d ≤ 20).
pub fn shapley_exact(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    exact_core(&Predictor::Generic(predict), x, background)
}

fn sampled_core(
    predictor: &Predictor<'_>,
    x: &[f64],
    background: ArrayView2<'_, f64>,
    permutations: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_explain_input(x, background)?;
    if permutations < 1 {
        return Err(Error::validation("permutations must be at least 1"));
    }
    let d = x.len();
    let n_blocks = permutations.div_ceil(PERMUTATION_BLOCK);
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut sum = vec![0.0; d];
            let mut sum_sq = vec![0.0; d];
            let mut order: Vec<usize> = (0..d).collect();
            let mut z = vec![0.0; d];
            let lo = b * PERMUTATION_BLOCK;
            let hi = (lo + PERMUTATION_BLOCK).min(permutations);
            for p in lo..hi {
                let mut stream = rng::stream(seed, &[SHAP_DOMAIN, p as u64]);
                let bg = background.row(stream.gen_range(0..background.nrows()));
                order.shuffle(&mut stream);
                z.copy_from_slice(bg.as_slice().expect("contiguous background row"));
                let (mut state, mut prev) = predictor.begin(&z);
                for &j in &order {
                    let old = z[j];
                    z[j] = x[j];
                    let v = predictor.step(&mut state, &z, j, old);
                    let contribution = v - prev;
                    sum[j] += contribution;
                    sum_sq[j] += contribution * contribution;
                    prev = v;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut phi = vec![0.0; d];
    let mut second = vec![0.0; d];
    for (sum, sum_sq) in &blocks {
        for j in 0..d {
            phi[j] += sum[j];
            second[j] += sum_sq[j];
        }
    }
    let m = permutations as f64;
    let mut stderr = vec![0.0; d];
    for j in 0..d {
        phi[j] /= m;
        let variance = (second[j] / m - phi[j] * phi[j]).max(0.0);
        stderr[j] = (variance / m).sqrt();
    }
    Ok((phi, stderr))
}

/// Permutation-sampling Shapley estimate (unbiased for the exact value).
pub fn shapley_sampled(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: ArrayView2<'_, f64>,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(sampled_core(&Predictor::Generic(predict), x, background, permutations, seed)?.0)
}

/// [`shapley_sampled`] plus the standard error of each φ estimate.
pub fn shapley_sampled_with_stderr(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: ArrayView2<'_, f64>,
    permutations: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    sampled_core(&Predictor::Generic(predict), x, background, permutations, seed)
}

/// Sampled Shapley values of an MLP using incremental first-layer updates;
/// same estimator and RNG streams as [`shapley_sampled`].
pub fn shapley_sampled_mlp(
    model: &MlpModel,
    x: &[f64],
    background: ArrayView2<'_, f64>,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    model.check_input(x.len())?;
    Ok(sampled_core(&Predictor::Mlp(model), x, background, permutations, seed)?.0)
}

fn explain_core(
    predictor: &Predictor<'_>,
    rows: ArrayView2<'_, f64>,
    background: ArrayView2<'_, f64>,
    config: &AttributionConfig,
) -> Result<AttributionResult> {
    config.validate()?;
    if rows.nrows() == 0 {
        return Err(Error::validation("no rows to explain"));
    }
    if rows.ncols() != background.ncols() {
        return Err(Error::validation(format!(
            "rows have {} features, background has {}",
            rows.ncols(),
            background.ncols()
        )));
    }
    let base_value = background
        .rows()
        .into_iter()
        .map(|r| predictor.value(r.as_slice().expect("contiguous background row")))
        .sum::<f64>()
        / background.nrows() as f64;
    let per_row: Vec<Vec<f64>> = rows
        .rows()
        .into_iter()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(r, row)| {
            let x: Vec<f64> = row.to_vec();
            match config.mode {
                AttributionMode::Exact => exact_core(predictor, &x, background),
                AttributionMode::Sampled => {
                    // Per-row streams: mix the row index into the seed.
                    let row_seed = rng::mix(config.seed, &[r as u64]);
                    Ok(sampled_core(predictor, &x, background, config.permutations, row_seed)?.0)
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut phi = Array2::zeros((rows.nrows(), rows.ncols()));
    for (r, values) in per_row.iter().enumerate() {
        for (j, v) in values.iter().enumerate() {
            phi[[r, j]] = *v;
        }
    }
    Ok(AttributionResult { base_value, phi })
}

/// Explains every row of `rows` against the background.
pub fn explain(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    rows: ArrayView2<'_, f64>,
    background: ArrayView2<'_, f64>,
    config: &AttributionConfig,
) -> Result<AttributionResult> {
    explain_core(&Predictor::Generic(predict), rows, background, config)
}

/// [`explain`] for an MLP via the incremental first-layer path.
pub fn explain_mlp(
    model: &MlpModel,
    rows: ArrayView2<'_, f64>,
    background: ArrayView2<'_, f64>,
    config: &AttributionConfig,
) -> Result<AttributionResult> {
    model.check_input(rows.ncols())?;
    explain_core(&Predictor::Mlp(model), rows, background, config)
}

/// Mean |φ| per feature over the explained rows, ranked descending with
/// ties broken by catalog (feature) index.
pub fn global_importance(result: &AttributionResult) -> Result<GlobalImportance> {
    let n = result.phi.nrows();
    if n == 0 {
        return Err(Error::validation("no explained rows to aggregate"));
    }
    let d = result.phi.ncols();
    let mut scores = vec![0.0; d];
    for row in result.phi.rows() {
        for (j, v) in row.iter().enumerate() {
            scores[j] += v.abs();
        }
    }
    for s in &mut scores {
        *s /= n as f64;
    }
    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    Ok(GlobalImportance { scores, ranking })
}

/// First k features of the importance ranking.
pub fn select_top_k(importance: &GlobalImportance, k: usize) -> Result<Vec<usize>> {
    let d = importance.ranking.len();
    if k < 1 || k > d {
        return Err(Error::validation(format!(
            "k must lie in 1..={d}, got {k}"
        )));
    }
    Ok(importance.ranking[..k].to_vec())
}

/// One point of the feature-count ablation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub k: usize,
    pub test_r2: f64,
    pub test_rmse: f64,
}

/// Retrains at each k over the top-k features of the ranking. `retrain`
/// receives the selected feature indices and returns (test R², test RMSE).
pub fn ablation_sweep<F>(
    k_values: &[usize],
    importance: &GlobalImportance,
    mut retrain: F,
) -> Result<Vec<AblationPoint>>
where
    F: FnMut(&[usize]) -> Result<(f64, f64)>,
{
    if k_values.is_empty() {
        return Err(Error::validation("no k values to sweep"));
    }
    if k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("k values must be strictly ascending"));
    }
    let mut curve = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let selected = select_top_k(importance, k)?;
        let (test_r2, test_rmse) = retrain(&selected)?;
        curve.push(AblationPoint { k, test_r2, test_rmse });
    }
    Ok(curve)
}
