//! Statistical-domain trace features.

use super::util::{mean, quantile_sorted};
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 10;
pub const QUANTILE_LEVELS: [f64; 10] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];
pub const PERCENTILES: [f64; 6] = [1.0, 5.0, 25.0, 75.0, 95.0, 99.0];

/// Names of the 40 statistical features in canonical order.
pub fn statistical_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "mean",
        "median",
        "max",
        "min",
        "variance",
        "std",
        "skewness",
        "kurtosis",
        "rms",
        "iqr",
        "mean_abs_deviation",
        "median_abs_deviation",
        "range",
        "hist_mode",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((0..HISTOGRAM_BINS).map(|b| format!("hist_bin_{b:02}")));
    names.extend(
        QUANTILE_LEVELS
            .iter()
            .map(|q| format!("quantile_{:02}", (q * 100.0).round() as u32)),
    );
    names.extend(
        PERCENTILES
            .iter()
            .map(|p| format!("percentile_{:02}", *p as u32)),
    );
    names
}

/// Computes the 40 statistical features in the order of [`statistical_names`].
pub fn statistical_features(trace: &[f64]) -> Result<Vec<f64>> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "statistical features need at least 2 samples, got {n}"
        )));
    }

    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let min = sorted[0];
    let max = sorted[n - 1];

    let m = mean(trace);
    let median = quantile_sorted(&sorted, 0.5);
    let variance = trace.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    let std = variance.sqrt();
    let (skewness, kurtosis) = if std == 0.0 {
        (0.0, 0.0)
    } else {
        let m3 = trace.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n as f64;
        let m4 = trace.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n as f64;
        (m3 / std.powi(3), m4 / (variance * variance) - 3.0)
    };
    let rms = (trace.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mean_abs_deviation = trace.iter().map(|v| (v - m).abs()).sum::<f64>() / n as f64;
    let abs_dev: Vec<f64> = trace.iter().map(|v| (v - median).abs()).collect();
    let median_abs_deviation = super::util::median(&abs_dev);
    let range = max - min;

    // Histogram over [min, max]; a zero-width range puts all mass in bin 0.
    let width = range / HISTOGRAM_BINS as f64;
    let mut hist = vec![0.0; HISTOGRAM_BINS];
    for &v in trace {
        let bin = if width == 0.0 {
            0
        } else {
            (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1)
        };
        hist[bin] += 1.0;
    }
    for h in hist.iter_mut() {
        *h /= n as f64;
    }
    let densest = hist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(b, _)| b)
        .unwrap();
    let hist_mode = min + (densest as f64 + 0.5) * width;

    let mut out = vec![
        m,
        median,
        max,
        min,
        variance,
        std,
        skewness,
        kurtosis,
        rms,
        iqr,
        mean_abs_deviation,
        median_abs_deviation,
        range,
        hist_mode,
    ];
    out.extend(hist);
    out.extend(QUANTILE_LEVELS.iter().map(|&q| quantile_sorted(&sorted, q)));
    out.extend(PERCENTILES.iter().map(|&p| quantile_sorted(&sorted, p / 100.0)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn by_name(values: &[f64], name: &str) -> f64 {
        let names = statistical_names();
        values[names.iter().position(|n| n == name).unwrap()]
    }

    #[test]
    fn forty_features_in_canonical_order() {
        assert_eq!(statistical_names().len(), 40);
        assert_eq!(statistical_features(&[1.0, 2.0]).unwrap().len(), 40);
        assert_eq!(statistical_names()[14], "hist_bin_00");
        assert_eq!(statistical_names()[24], "quantile_05");
        assert_eq!(statistical_names()[34], "percentile_01");
    }

    #[test]
    fn hand_values_for_small_trace() {
        let f = statistical_features(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(by_name(&f, "mean"), 4.0);
        assert_eq!(by_name(&f, "range"), 4.0);
        assert_relative_eq!(by_name(&f, "variance"), 8.0 / 3.0);
        assert_eq!(by_name(&f, "median"), 4.0);
        assert_eq!(by_name(&f, "max"), 6.0);
        assert_eq!(by_name(&f, "min"), 2.0);
    }

    #[test]
    fn skewness_hand_value() {
        // x = [0,0,1]: m3 = 2/27, σ³ = (2/9)^{3/2} ⇒ skew = 1/√2.
        let f = statistical_features(&[0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(by_name(&f, "skewness"), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn kurtosis_hand_value() {
        // Two-point symmetric mass has m4/σ⁴ = 1 ⇒ excess −2.
        let f = statistical_features(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(by_name(&f, "kurtosis"), -2.0);
    }

    #[test]
    fn constant_trace_degenerates() {
        let f = statistical_features(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(by_name(&f, "variance"), 0.0);
        assert_eq!(by_name(&f, "skewness"), 0.0);
        assert_eq!(by_name(&f, "kurtosis"), 0.0);
        assert_eq!(by_name(&f, "hist_bin_00"), 1.0);
        for b in 1..HISTOGRAM_BINS {
            assert_eq!(by_name(&f, &format!("hist_bin_{b:02}")), 0.0);
        }
        assert_eq!(by_name(&f, "hist_mode"), 3.0);
    }

    #[test]
    fn negation_flips_skewness_keeps_variance() {
        let x = vec![0.3, -1.2, 2.5, 0.9, -0.4, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = statistical_features(&x).unwrap();
        let b = statistical_features(&neg).unwrap();
        assert_relative_eq!(by_name(&a, "skewness"), -by_name(&b, "skewness"), epsilon = 1e-12);
        assert_relative_eq!(by_name(&a, "variance"), by_name(&b, "variance"), epsilon = 1e-12);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let f = statistical_features(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(by_name(&f, "quantile_05"), 0.15);
        assert_relative_eq!(by_name(&f, "quantile_95"), 2.85);
        assert_relative_eq!(by_name(&f, "percentile_25"), 0.75);
        let g = statistical_features(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(by_name(&g, "iqr"), 1.5);
    }

    #[test]
    fn histogram_counts_sum_to_one() {
        let x: Vec<f64> = (0..37).map(|i| (i as f64 * 0.73).sin()).collect();
        let f = statistical_features(&x).unwrap();
        let total: f64 = (0..HISTOGRAM_BINS)
            .map(|b| by_name(&f, &format!("hist_bin_{b:02}")))
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_short_traces() {
        assert!(statistical_features(&[1.0]).is_err());
    }
}
