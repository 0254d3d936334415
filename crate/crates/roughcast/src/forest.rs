//! Regression trees and tree ensembles: CART decision trees, random
//! forests, and extremely randomized trees.
//!
//! All splits minimize weighted child variance. Ties at a threshold route
//! left (x ≤ threshold → left), and split-candidate ties resolve to the
//! lowest feature index then the lowest threshold, so fitted trees are
//! reproducible across platforms. Per-tree RNG streams are derived from
//! (seed, tree index), making ensemble fitting order- and thread-count
//! independent.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

const TREE_DOMAIN: u64 = 0x54524545;
const FOREST_DOMAIN: u64 = 0x464f5245;

/// Split-threshold search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    /// Scan midpoints between consecutive sorted unique feature values.
    Best,
    /// Draw one threshold uniformly over the feature's node range.
    RandomThreshold,
}

/// Number of candidate features considered per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    /// ⌈√d⌉ features drawn per node.
    Sqrt,
    /// ⌈d/3⌉ features drawn per node.
    Third,
}

impl FeatureSubset {
    fn size(&self, d: usize) -> usize {
        match self {
            FeatureSubset::All => d,
            FeatureSubset::Sqrt => (d as f64).sqrt().ceil() as usize,
            FeatureSubset::Third => (d as f64 / 3.0).ceil() as usize,
        }
    }
}

/// Single-tree fitting parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub splitter: Splitter,
    pub feature_subset: FeatureSubset,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            splitter: Splitter::Best,
            feature_subset: FeatureSubset::All,
            seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::validation("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::validation("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Ensemble fitting parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            tree: TreeConfig::default(),
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::validation("n_trees must be at least 1"));
        }
        self.tree.validate()
    }

    /// Random-forest preset: bootstrap resampling, best splitter over ⌈d/3⌉
    /// random features per node.
    pub fn random_forest(seed: u64) -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            tree: TreeConfig {
                splitter: Splitter::Best,
                feature_subset: FeatureSubset::Third,
                ..TreeConfig::default()
            },
            seed,
        }
    }

    /// Extra-trees preset: full sample, one uniform-random cut-point per
    /// feature, all d features as candidates.
    pub fn extra_trees(seed: u64) -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: false,
            tree: TreeConfig {
                splitter: Splitter::RandomThreshold,
                feature_subset: FeatureSubset::All,
                ..TreeConfig::default()
            },
            seed,
        }
    }
}

/// Node of a fitted tree, stored in a flat arena (children by index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        count: usize,
    },
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted regression tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::validation(format!(
                "input has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value, .. } => return Ok(*value),
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A fitted tree ensemble; prediction is the mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl Ensemble {
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::validation(format!(
                "input has {} features, ensemble expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut total = 0.0;
        for tree in &self.trees {
            total += tree.predict_row(x)?;
        }
        Ok(total / self.trees.len() as f64)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            let row: Vec<f64> = row.iter().cloned().collect();
            out[i] = self.predict_row(&row)?;
        }
        Ok(out)
    }
}

/// Serialized ensemble layout (`format_version` 1).
#[derive(Serialize, Deserialize)]
struct SavedEnsemble {
    format_version: u32,
    config: ForestConfig,
    ensemble: Ensemble,
}

impl Ensemble {
    pub fn save(&self, config: &ForestConfig, path: &Path) -> Result<()> {
        let doc = SavedEnsemble {
            format_version: 1,
            config: config.clone(),
            ensemble: self.clone(),
        };
        let text = serde_json::to_string(&doc)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Ensemble, ForestConfig)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: SavedEnsemble = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        if doc.format_version != 1 {
            return Err(Error::format(format!(
                "{}: unsupported format_version {}",
                path.display(),
                doc.format_version
            )));
        }
        Ok((doc.ensemble, doc.config))
    }
}

fn check_training_input(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::validation("cannot fit a tree on 0 rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::validation(format!(
            "{} input rows vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("training data must be finite"));
    }
    Ok(())
}

/// Fits a single CART tree.
pub fn fit_tree(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, config: &TreeConfig) -> Result<Tree> {
    config.validate()?;
    check_training_input(x, y)?;
    let mut stream = rng::stream(config.seed, &[TREE_DOMAIN]);
    let indices: Vec<usize> = (0..x.nrows()).collect();
    Ok(build_tree(x, y, indices, config, &mut stream))
}

/// Fits an ensemble honoring every field of `config`. With the
/// [`ForestConfig::random_forest`] preset this is the random forest of the
/// usual description: bootstrap resamples, best splits over ⌈d/3⌉ features.
pub fn fit_random_forest(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    config: &ForestConfig,
) -> Result<Ensemble> {
    config.validate()?;
    check_training_input(x, y)?;
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut stream = rng::stream(config.seed, &[FOREST_DOMAIN, t as u64]);
            let n = x.nrows();
            let indices: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| stream.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            build_tree(x, y, indices, &config.tree, &mut stream)
        })
        .collect();
    Ok(Ensemble {
        trees,
        n_features: x.ncols(),
    })
}

/// Fits extremely randomized trees: the full training set for every tree
/// (no bootstrap), one uniform-random cut-point per candidate feature, and
/// all d features as candidates. Those three fields of `config` are
/// overridden; n_trees, seed, and the depth/minimum-size limits are honored.
pub fn fit_extra_trees(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    config: &ForestConfig,
) -> Result<Ensemble> {
    let config = ForestConfig {
        bootstrap: false,
        tree: TreeConfig {
            splitter: Splitter::RandomThreshold,
            feature_subset: FeatureSubset::All,
            ..config.tree.clone()
        },
        ..config.clone()
    };
    fit_random_forest(x, y, &config)
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Sum of child SSEs; lower is better.
    score: f64,
}

fn build_tree(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    indices: Vec<usize>,
    config: &TreeConfig,
    stream: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = Vec::new();
    build_node(x, y, indices, 0, config, stream, &mut nodes);
    Tree {
        nodes,
        n_features: x.ncols(),
    }
}

fn build_node(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    indices: Vec<usize>,
    depth: usize,
    config: &TreeConfig,
    stream: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n = indices.len();
    let mean = indices.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let pure = indices.iter().all(|&i| y[i] == y[indices[0]]);
    let depth_capped = config.max_depth.is_some_and(|d| depth >= d);

    let split = if pure || depth_capped || n < config.min_samples_split {
        None
    } else {
        find_split(x, y, &indices, config, stream)
    };

    match split {
        None => {
            nodes.push(TreeNode::Leaf { value: mean, count: n });
            nodes.len() - 1
        }
        Some(s) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .into_iter()
                .partition(|&i| x[[i, s.feature]] <= s.threshold);
            let id = nodes.len();
            nodes.push(TreeNode::Leaf { value: mean, count: n });
            let left = build_node(x, y, left_idx, depth + 1, config, stream, nodes);
            let right = build_node(x, y, right_idx, depth + 1, config, stream, nodes);
            nodes[id] = TreeNode::Internal {
                feature: s.feature,
                threshold: s.threshold,
                left,
                right,
            };
            id
        }
    }
}

/// Candidate features for a node, ascending (the tie-break order).
fn candidate_features(d: usize, config: &TreeConfig, stream: &mut ChaCha8Rng) -> Vec<usize> {
    let k = config.feature_subset.size(d).clamp(1, d);
    if k == d {
        return (0..d).collect();
    }
    // Partial Fisher-Yates over the feature indices.
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = stream.gen_range(i..d);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

fn find_split(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    indices: &[usize],
    config: &TreeConfig,
    stream: &mut ChaCha8Rng,
) -> Option<Split> {
    let features = candidate_features(x.ncols(), config, stream);
    let mut best: Option<Split> = None;
    for &feature in &features {
        let candidate = match config.splitter {
            Splitter::Best => best_threshold(x, y, indices, feature, config),
            Splitter::RandomThreshold => random_threshold(x, y, indices, feature, config, stream),
        };
        // Strict improvement only: scanning features (and thresholds)
        // ascending makes ties resolve to the lowest feature and threshold.
        if let Some(c) = candidate {
            if best.as_ref().is_none_or(|b| c.score < b.score) {
                best = Some(c);
            }
        }
    }
    best
}

/// Best midpoint split of one feature by weighted child variance.
fn best_threshold(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    indices: &[usize],
    feature: usize,
    config: &TreeConfig,
) -> Option<Split> {
    let n = indices.len();
    let mut pairs: Vec<(f64, f64)> = indices.iter().map(|&i| (x[[i, feature]], y[i])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

    let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
    let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    let mut best: Option<Split> = None;
    for w in 0..n - 1 {
        left_sum += pairs[w].1;
        left_sq += pairs[w].1 * pairs[w].1;
        if pairs[w].0 == pairs[w + 1].0 {
            continue;
        }
        let n_l = w + 1;
        let n_r = n - n_l;
        if n_l < config.min_samples_leaf || n_r < config.min_samples_leaf {
            continue;
        }
        let right_sum = total_sum - left_sum;
        let right_sq = total_sq - left_sq;
        let score = (left_sq - left_sum * left_sum / n_l as f64)
            + (right_sq - right_sum * right_sum / n_r as f64);
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(Split {
                feature,
                threshold: (pairs[w].0 + pairs[w + 1].0) / 2.0,
                score,
            });
        }
    }
    best
}

/// One uniform-random cut-point over the feature's node range.
fn random_threshold(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    indices: &[usize],
    feature: usize,
    config: &TreeConfig,
    stream: &mut ChaCha8Rng,
) -> Option<Split> {
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for &i in indices {
        mn = mn.min(x[[i, feature]]);
        mx = mx.max(x[[i, feature]]);
    }
    if mn == mx {
        return None;
    }
    let threshold = stream.gen_range(mn..mx);
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    let mut n_l = 0usize;
    let mut total_sum = 0.0;
    let mut total_sq = 0.0;
    for &i in indices {
        let v = y[i];
        total_sum += v;
        total_sq += v * v;
        if x[[i, feature]] <= threshold {
            left_sum += v;
            left_sq += v * v;
            n_l += 1;
        }
    }
    let n_r = indices.len() - n_l;
    if n_l < config.min_samples_leaf || n_r < config.min_samples_leaf {
        return None;
    }
    let right_sum = total_sum - left_sum;
    let right_sq = total_sq - left_sq;
    let score = (left_sq - left_sum * left_sum / n_l as f64)
        + (right_sq - right_sum * right_sum / n_r as f64);
    Some(Split {
        feature,
        threshold,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{r2, rmse};
    use approx::assert_relative_eq;
    use ndarray::{array, Array, Array2};
    use rand::SeedableRng;

    fn train_mse(pred: &[f64], y: &[f64]) -> f64 {
        pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
    }

    fn random_regression(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0));
        let y = Array::from_shape_fn(n, |i| {
            x[[i, 0]] + 2.0 * x[[i, 1]] * x[[i, 1]] - x[[i, 2]] + 0.1 * rng.gen_range(-1.0..1.0)
        });
        (x, y)
    }

    #[test]
    fn constant_target_yields_single_leaf() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = array![7.0, 7.0, 7.0];
        let tree = fit_tree(x.view(), y.view(), &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_row(&[99.0]).unwrap(), 7.0);
    }

    #[test]
    fn two_point_problem_splits_at_midpoint() {
        let x = array![[0.0], [1.0]];
        let y = array![0.0, 10.0];
        let tree = fit_tree(x.view(), y.view(), &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        match &tree.nodes[0] {
            TreeNode::Internal { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("expected internal root, got {other:?}"),
        }
        assert_eq!(tree.predict_row(&[0.2]).unwrap(), 0.0);
        assert_eq!(tree.predict_row(&[0.8]).unwrap(), 10.0);
        // Tie at the threshold routes left.
        assert_eq!(tree.predict_row(&[0.5]).unwrap(), 0.0);
    }

    #[test]
    fn unique_inputs_reach_zero_training_error() {
        let (x, y) = random_regression(1, 40);
        let tree = fit_tree(x.view(), y.view(), &TreeConfig::default()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let row: Vec<f64> = row.to_vec();
            assert_eq!(tree.predict_row(&row).unwrap(), y[i]);
        }
    }

    #[test]
    fn forest_without_randomness_reduces_to_single_tree() {
        let (x, y) = random_regression(2, 30);
        let config = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            tree: TreeConfig::default(),
            seed: 9,
        };
        let forest = fit_random_forest(x.view(), y.view(), &config).unwrap();
        let tree = fit_tree(x.view(), y.view(), &TreeConfig::default()).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn forest_predicts_constant_for_constant_target() {
        let (x, _) = random_regression(3, 25);
        let y = Array1::from_elem(25, 4.5);
        let forest =
            fit_random_forest(x.view(), y.view(), &ForestConfig::random_forest(1)).unwrap();
        assert_eq!(forest.predict_row(&[0.0, 0.0, 0.0]).unwrap(), 4.5);
        assert_eq!(forest.predict_row(&[100.0, -5.0, 3.0]).unwrap(), 4.5);
    }

    #[test]
    fn predictions_stay_within_target_range() {
        let (x, y) = random_regression(4, 50);
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for config in [ForestConfig::random_forest(5), ForestConfig::extra_trees(5)] {
            let forest = fit_random_forest(x.view(), y.view(), &config).unwrap();
            for _ in 0..50 {
                let probe = [
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                ];
                let p = forest.predict_row(&probe).unwrap();
                assert!(p >= lo && p <= hi, "{p} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn extra_trees_fit_training_set_exactly() {
        let (x, y) = random_regression(6, 40);
        let forest = fit_extra_trees(x.view(), y.view(), &ForestConfig::extra_trees(2)).unwrap();
        let pred = forest.predict(x.view()).unwrap();
        let y_vec = y.to_vec();
        assert_relative_eq!(r2(&y_vec, &pred.to_vec()).unwrap(), 1.0, epsilon = 1e-12);
        assert!(rmse(&y_vec, &pred.to_vec()).unwrap() < 1e-9);
    }

    #[test]
    fn extra_trees_single_row_predicts_its_target() {
        let x = array![[1.0, 2.0, 3.0]];
        let y = array![5.5];
        let forest = fit_extra_trees(x.view(), y.view(), &ForestConfig::extra_trees(0)).unwrap();
        assert_eq!(forest.predict_row(&[9.0, 9.0, 9.0]).unwrap(), 5.5);
    }

    #[test]
    fn ensemble_size_barely_moves_test_r2() {
        for seed in 0..5 {
            let (x, y) = random_regression(100 + seed, 120);
            let (train_x, test_x) = (x.slice(ndarray::s![..80, ..]), x.slice(ndarray::s![80.., ..]));
            let (train_y, test_y) = (y.slice(ndarray::s![..80]), y.slice(ndarray::s![80..]));
            let mut r2s = Vec::new();
            for n_trees in [100, 200] {
                let config = ForestConfig {
                    n_trees,
                    ..ForestConfig::extra_trees(seed)
                };
                let forest = fit_extra_trees(train_x, train_y, &config).unwrap();
                let pred = forest.predict(test_x).unwrap();
                r2s.push(r2(&test_y.to_vec(), &pred.to_vec()).unwrap());
            }
            assert!(
                (r2s[0] - r2s[1]).abs() <= 0.02,
                "seed {seed}: R² {} vs {}",
                r2s[0],
                r2s[1]
            );
        }
    }

    #[test]
    fn hand_built_tree_tie_routes_left() {
        let tree = Tree {
            nodes: vec![
                TreeNode::Internal {
                    feature: 0,
                    threshold: 1.5,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { value: -1.0, count: 1 },
                TreeNode::Leaf { value: 1.0, count: 1 },
            ],
            n_features: 1,
        };
        assert_eq!(tree.predict_row(&[1.5]).unwrap(), -1.0);
        assert_eq!(tree.predict_row(&[1.5000001]).unwrap(), 1.0);
    }

    #[test]
    fn permuting_trees_keeps_predictions() {
        let (x, y) = random_regression(8, 30);
        let mut forest =
            fit_random_forest(x.view(), y.view(), &ForestConfig::random_forest(3)).unwrap();
        let before = forest.predict_row(&[0.3, -0.2, 1.0]).unwrap();
        forest.trees.reverse();
        let after = forest.predict_row(&[0.3, -0.2, 1.0]).unwrap();
        assert_relative_eq!(before, after, max_relative = 1e-12);
    }

    #[test]
    fn fitting_is_deterministic_per_seed() {
        let (x, y) = random_regression(9, 35);
        for config in [ForestConfig::random_forest(4), ForestConfig::extra_trees(4)] {
            let a = fit_random_forest(x.view(), y.view(), &config).unwrap();
            let b = fit_random_forest(x.view(), y.view(), &config).unwrap();
            assert_eq!(a, b);
            let other = fit_random_forest(
                x.view(),
                y.view(),
                &ForestConfig {
                    seed: 5,
                    ..config.clone()
                },
            )
            .unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn deeper_trees_never_increase_training_mse() {
        let (x, y) = random_regression(10, 60);
        let y_vec = y.to_vec();
        let mut last = f64::INFINITY;
        for depth in 1..=8 {
            let config = TreeConfig {
                max_depth: Some(depth),
                ..TreeConfig::default()
            };
            let tree = fit_tree(x.view(), y.view(), &config).unwrap();
            let pred: Vec<f64> = x
                .rows()
                .into_iter()
                .map(|r| tree.predict_row(&r.to_vec()).unwrap())
                .collect();
            let mse = train_mse(&pred, &y_vec);
            assert!(mse <= last + 1e-12, "depth {depth}: {mse} > {last}");
            last = mse;
        }
    }

    #[test]
    fn save_load_round_trips() {
        let (x, y) = random_regression(11, 20);
        let config = ForestConfig::extra_trees(7);
        let forest = fit_extra_trees(x.view(), y.view(), &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        forest.save(&config, &path).unwrap();
        let (loaded, loaded_config) = Ensemble::load(&path).unwrap();
        assert_eq!(forest, loaded);
        assert_eq!(config, loaded_config);
    }

    #[test]
    fn rejects_empty_and_mismatched_input() {
        let empty_x = Array2::<f64>::zeros((0, 2));
        let empty_y = Array1::<f64>::zeros(0);
        assert!(fit_tree(empty_x.view(), empty_y.view(), &TreeConfig::default()).is_err());
        let (x, y) = random_regression(12, 10);
        let tree = fit_tree(x.view(), y.view(), &TreeConfig::default()).unwrap();
        assert!(tree.predict_row(&[1.0]).is_err());
    }
}
