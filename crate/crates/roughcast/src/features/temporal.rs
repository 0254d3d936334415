//! Temporal-domain trace features.

use super::util::{least_squares_slope, mean, median};
use crate::error::{Error, Result};

pub const TEMPORAL_NAMES: [&str; 14] = [
    "absolute_energy",
    "area_under_curve",
    "autocorrelation_lag1",
    "centroid",
    "mean_abs_diff",
    "mean_diff",
    "median_abs_diff",
    "median_diff",
    "negative_turning_points",
    "positive_turning_points",
    "peak_to_peak",
    "slope",
    "sum_abs_diff",
    "zero_crossing_rate",
];

/// Computes the 14 temporal features in the order of [`TEMPORAL_NAMES`].
pub fn temporal_features(trace: &[f64]) -> Result<Vec<f64>> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "temporal features need at least 2 samples, got {n}"
        )));
    }

    let absolute_energy: f64 = trace.iter().map(|v| v * v).sum();
    let area_under_curve: f64 = trace.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum();

    let autocorrelation_lag1 = if absolute_energy == 0.0 {
        0.0
    } else {
        trace.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / absolute_energy
    };
    let centroid = if absolute_energy == 0.0 {
        0.0
    } else {
        trace
            .iter()
            .enumerate()
            .map(|(t, v)| t as f64 * v * v)
            .sum::<f64>()
            / absolute_energy
    };

    let diffs: Vec<f64> = trace.windows(2).map(|w| w[1] - w[0]).collect();
    let abs_diffs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let mean_abs_diff = mean(&abs_diffs);
    let mean_diff = mean(&diffs);
    let median_abs_diff = median(&abs_diffs);
    let median_diff = median(&diffs);
    let sum_abs_diff: f64 = abs_diffs.iter().sum();

    let mut negative_turning_points = 0.0;
    let mut positive_turning_points = 0.0;
    for w in trace.windows(3) {
        if w[1] < w[0] && w[1] < w[2] {
            negative_turning_points += 1.0;
        } else if w[1] > w[0] && w[1] > w[2] {
            positive_turning_points += 1.0;
        }
    }

    let max = trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = trace.iter().cloned().fold(f64::INFINITY, f64::min);
    let peak_to_peak = max - min;

    let index: Vec<f64> = (0..n).map(|t| t as f64).collect();
    let slope = least_squares_slope(&index, trace);

    // Zeros count as positive, so a constant zero trace has no crossings.
    let sign = |v: f64| v >= 0.0;
    let crossings = trace.windows(2).filter(|w| sign(w[0]) != sign(w[1])).count();
    let zero_crossing_rate = crossings as f64 / (n - 1) as f64;

    Ok(vec![
        absolute_energy,
        area_under_curve,
        autocorrelation_lag1,
        centroid,
        mean_abs_diff,
        mean_diff,
        median_abs_diff,
        median_diff,
        negative_turning_points,
        positive_turning_points,
        peak_to_peak,
        slope,
        sum_abs_diff,
        zero_crossing_rate,
    ])
}
