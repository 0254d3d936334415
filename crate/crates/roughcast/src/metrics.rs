//! Regression evaluation metrics: MSE, RMSE, and R².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/test metrics for one experimental setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Setting name, e.g. `grinding` or `combined`.
    pub setting: String,
    /// Row label as used in the result tables, `(a)`..`(f)`.
    pub label: String,
    pub train_r2: f64,
    pub test_r2: f64,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::validation("metrics on empty input"));
    }
    if y.len() != y_hat.len() {
        return Err(Error::validation(format!(
            "metrics length mismatch: {} targets vs {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(())
}

/// Mean squared error, `Σ(y_i − ŷ_i)² / N`.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let sum: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    Ok(sum / y.len() as f64)
}

/// Root mean squared error, `√MSE`.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    mse(y, y_hat).map(f64::sqrt)
}

/// Coefficient of determination, `1 − Σ(y−ŷ)² / Σ(y−ȳ)²`.
///
/// A constant target makes the denominator zero; that case is rejected with
/// [`Error::DegenerateTarget`] rather than returning a NaN.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    if y.len() < 2 {
        return Err(Error::validation("r2 needs at least 2 observations"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum();
    if ss_tot <= 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let ss_res: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mse_perfect_is_zero() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn mse_hand_value() {
        // (9 + 16) / 2 = 12.5
        assert_eq!(mse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5);
    }

    #[test]
    fn mse_quadratic_in_residuals() {
        let y = [1.0, 2.0, -1.0];
        let a = [0.5, 2.5, 0.0];
        let b: Vec<f64> = y.iter().zip(&a).map(|(y, a)| y + 2.0 * (a - y)).collect();
        assert_relative_eq!(
            mse(&y, &b).unwrap(),
            4.0 * mse(&y, &a).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rmse_hand_value() {
        assert_relative_eq!(
            rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(),
            12.5f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn rmse_single_residual_is_abs() {
        assert_eq!(rmse(&[2.0], &[5.0]).unwrap(), 3.0);
    }

    #[test]
    fn rmse_squared_equals_mse() {
        let y = [0.3, -1.2, 4.5, 2.2];
        let p = [0.1, -0.9, 5.0, 2.0];
        let r = rmse(&y, &p).unwrap();
        assert_relative_eq!(r * r, mse(&y, &p).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn r2_perfect_is_one() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn r2_mean_predictor_is_zero() {
        let y = [1.0, 2.0, 3.0];
        let mean = [2.0, 2.0, 2.0];
        assert_eq!(r2(&y, &mean).unwrap(), 0.0);
    }

    #[test]
    fn r2_hand_value() {
        // 1 − 4/2 = −1
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap(), -1.0);
    }

    #[test]
    fn r2_constant_target_rejected() {
        let err = r2(&[2.0, 2.0], &[1.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateTarget));
    }

    #[test]
    fn r2_affine_invariance() {
        let y = [1.0, 2.0, 4.0, -3.0];
        let p = [1.2, 1.8, 4.5, -2.0];
        let scale = -2.5;
        let shift = 7.0;
        let ys: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
        let ps: Vec<f64> = p.iter().map(|v| scale * v + shift).collect();
        assert_relative_eq!(
            r2(&y, &p).unwrap(),
            r2(&ys, &ps).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn r2_below_one_for_imperfect() {
        let y = [1.0, 2.0, 3.0];
        let p = [1.0, 2.0, 3.0 + 1e-6];
        assert!(r2(&y, &p).unwrap() < 1.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }
}
