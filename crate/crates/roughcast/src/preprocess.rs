//! Min-max normalization, train/test splitting, and k-fold planning.
//!
//! Normalization statistics are always fitted on training rows only, and the
//! target column is never normalized — metrics stay on the roughness scale.
//! Splits shuffle within each preprocessing-technique group, which stratifies
//! the combined setting and makes every individual-technique split the
//! restriction of the combined one.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::PreprocessingTechnique;
use crate::error::{Error, Result};
use crate::rng;

/// Fraction of each technique group assigned to training.
pub const TRAIN_RATIO: f64 = 0.8;

/// Default number of cross-validation folds.
pub const DEFAULT_FOLDS: usize = 4;

/// Domain tags keeping split and fold shuffles on independent RNG streams.
const SPLIT_DOMAIN: u64 = 0x53504c49_5400;
const KFOLD_DOMAIN: u64 = 0x4b464f4c_4400;

/// Identifies one sample across the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleRef {
    pub experiment_id: String,
    pub sample_id: u32,
}

impl SampleRef {
    pub fn new(experiment_id: impl Into<String>, sample_id: u32) -> Self {
        SampleRef {
            experiment_id: experiment_id.into(),
            sample_id,
        }
    }
}

/// Column-wise min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fits per-column minima and maxima.
pub fn fit_minmax(matrix: ArrayView2<'_, f64>, columns: &[String]) -> Result<NormalizationStats> {
    if matrix.nrows() == 0 {
        return Err(Error::validation("cannot fit normalization on 0 rows"));
    }
    if matrix.ncols() != columns.len() {
        return Err(Error::validation(format!(
            "matrix has {} columns but {} names were given",
            matrix.ncols(),
            columns.len()
        )));
    }
    let mut min = vec![f64::INFINITY; matrix.ncols()];
    let mut max = vec![f64::NEG_INFINITY; matrix.ncols()];
    for row in matrix.rows() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite value in column `{}`",
                    columns[j]
                )));
            }
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormalizationStats {
        columns: columns.to_vec(),
        min,
        max,
    })
}

/// Applies x' = (x − min)/(max − min) column-wise; constant columns map to 0.
///
/// Values outside the fitted range are not clamped, so test rows may fall
/// outside [0, 1].
pub fn apply_minmax(matrix: ArrayView2<'_, f64>, stats: &NormalizationStats) -> Result<Array2<f64>> {
    if matrix.ncols() != stats.columns.len() {
        return Err(Error::validation(format!(
            "matrix has {} columns but stats were fitted on {}",
            matrix.ncols(),
            stats.columns.len()
        )));
    }
    let mut out = matrix.to_owned();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let range = stats.max[j] - stats.min[j];
        if range == 0.0 {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - stats.min[j]) / range);
        }
    }
    Ok(out)
}

impl NormalizationStats {
    /// Scalar form of [`apply_minmax`] for column `col`.
    pub fn apply_value(&self, col: usize, v: f64) -> f64 {
        let range = self.max[col] - self.min[col];
        if range == 0.0 {
            0.0
        } else {
            (v - self.min[col]) / range
        }
    }

    /// Scalar inverse of [`apply_value`] for column `col`.
    pub fn invert_value(&self, col: usize, v: f64) -> f64 {
        let range = self.max[col] - self.min[col];
        if range == 0.0 {
            self.min[col]
        } else {
            self.min[col] + v * range
        }
    }

    /// Inverts [`apply_minmax`]: x = min + x'·(max − min). Constant columns
    /// recover their (single) training value.
    pub fn invert(&self, matrix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.columns.len() {
            return Err(Error::validation(format!(
                "matrix has {} columns but stats were fitted on {}",
                matrix.ncols(),
                self.columns.len()
            )));
        }
        let mut out = matrix.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let range = self.max[j] - self.min[j];
            if range == 0.0 {
                col.fill(self.min[j]);
            } else {
                col.mapv_inplace(|v| self.min[j] + v * range);
            }
        }
        Ok(out)
    }
}

/// Train/test partition of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub ratio: f64,
    pub train_ids: Vec<SampleRef>,
    pub test_ids: Vec<SampleRef>,
}

/// Splits ids grouped by technique: within each group, a seeded shuffle
/// assigns the first ⌊ratio·n⌋ ids to training and the rest to test.
///
/// Each group's shuffle stream is keyed on its technique, so splitting a
/// single technique on its own yields exactly the restriction of the
/// combined split.
pub fn split(
    groups: &[(PreprocessingTechnique, Vec<SampleRef>)],
    ratio: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut train_ids = Vec::new();
    let mut test_ids = Vec::new();
    for (technique, ids) in groups {
        if ids.len() < 5 {
            return Err(Error::validation(format!(
                "technique `{technique}` has {} samples; at least 5 required to split",
                ids.len()
            )));
        }
        let mut ids = ids.clone();
        ids.sort();
        let mut stream = rng::stream(seed, &[SPLIT_DOMAIN, technique.index() as u64]);
        ids.shuffle(&mut stream);
        let n_train = (ratio * ids.len() as f64).floor() as usize;
        test_ids.extend(ids.split_off(n_train));
        train_ids.extend(ids);
    }
    Ok(SplitPlan {
        seed,
        ratio,
        train_ids,
        test_ids,
    })
}

/// Cross-validation fold assignment over the training ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// `assignments[i]` is the fold of `ids[i]`.
    pub ids: Vec<SampleRef>,
    pub assignments: Vec<usize>,
}

/// Assigns folds round-robin after a seeded shuffle, so fold sizes differ by
/// at most one.
pub fn kfold(train_ids: &[SampleRef], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::validation(format!("k must be at least 2, got {k}")));
    }
    if train_ids.len() < k {
        return Err(Error::validation(format!(
            "cannot make {k} folds from {} ids",
            train_ids.len()
        )));
    }
    let mut ids = train_ids.to_vec();
    ids.sort();
    let mut stream = rng::stream(seed, &[KFOLD_DOMAIN]);
    ids.shuffle(&mut stream);
    let assignments = (0..ids.len()).map(|i| i % k).collect();
    Ok(FoldPlan {
        k,
        seed,
        ids,
        assignments,
    })
}

impl FoldPlan {
    /// Ids held out as the validation set of fold `fold`.
    pub fn validation_ids(&self, fold: usize) -> Vec<SampleRef> {
        self.ids
            .iter()
            .zip(&self.assignments)
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Ids used for training in fold `fold` (everything else).
    pub fn training_ids(&self, fold: usize) -> Vec<SampleRef> {
        self.ids
            .iter()
            .zip(&self.assignments)
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}
