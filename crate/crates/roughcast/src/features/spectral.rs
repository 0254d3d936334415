//! Spectral-domain trace features.
//!
//! The spectrum is the one-sided magnitude spectrum of the mean-removed
//! trace (photodiode DC offsets are nuisance), with frequencies
//! f_k = k·fs/N for k = 0..⌊N/2⌋ and power P_k = |X_k|².

use super::fft::magnitude_spectrum;
use super::util::{least_squares_slope, mean};
use crate::error::{Error, Result};

/// Default number of equal-width frequency bands, giving 15 + 2·160 = 335
/// spectral features.
pub const DEFAULT_BANDS: usize = 160;

const SCALAR_NAMES: [&str; 15] = [
    "fundamental_frequency",
    "max_power_frequency",
    "median_frequency",
    "centroid",
    "spread",
    "skewness",
    "kurtosis",
    "slope",
    "decrease",
    "entropy",
    "variation",
    "roll_off",
    "roll_on",
    "power_bandwidth",
    "max_psd",
];

/// Names of the `15 + 2·bands` spectral features in canonical order.
pub fn spectral_names(bands: usize) -> Vec<String> {
    let mut names: Vec<String> = SCALAR_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend((0..bands).map(|b| format!("band_mean_{b:03}")));
    names.extend((0..bands).map(|b| format!("band_max_{b:03}")));
    names
}

/// Computes the spectral features in the order of [`spectral_names`].
///
/// A trace with zero total spectral power (e.g. the all-zero signal) returns
/// all zeros: every ratio-form feature defines 0/0 as 0 so the output is
/// always finite.
pub fn spectral_features(trace: &[f64], sample_rate: f64, bands: usize) -> Result<Vec<f64>> {
    let n = trace.len();
    if n < 8 {
        return Err(Error::validation(format!(
            "spectral features need at least 8 samples, got {n}"
        )));
    }
    if bands == 0 {
        return Err(Error::validation("band count must be positive"));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::validation("sample_rate must be positive"));
    }
    let out_len = SCALAR_NAMES.len() + 2 * bands;

    let m = mean(trace);
    let centered: Vec<f64> = trace.iter().map(|v| v - m).collect();
    let mags = magnitude_spectrum(&centered);
    let freqs: Vec<f64> = (0..mags.len())
        .map(|k| k as f64 * sample_rate / n as f64)
        .collect();
    let powers: Vec<f64> = mags.iter().map(|v| v * v).collect();
    let total_mag: f64 = mags.iter().sum();
    let total_power: f64 = powers.iter().sum();
    if total_mag == 0.0 || total_power == 0.0 {
        return Ok(vec![0.0; out_len]);
    }

    // Largest non-DC magnitude peak (ties resolve to the lowest bin).
    let fundamental_frequency = freqs[argmax(&mags[1..]) + 1];
    let max_power_frequency = freqs[argmax(&powers)];
    let median_frequency = cumulative_power_frequency(&powers, &freqs, 0.5 * total_power);

    let centroid = freqs
        .iter()
        .zip(&mags)
        .map(|(f, m)| f * m)
        .sum::<f64>()
        / total_mag;
    let spread = (freqs
        .iter()
        .zip(&mags)
        .map(|(f, m)| (f - centroid).powi(2) * m)
        .sum::<f64>()
        / total_mag)
        .sqrt();
    let (skewness, kurtosis) = if spread == 0.0 {
        (0.0, 0.0)
    } else {
        let m3 = freqs
            .iter()
            .zip(&mags)
            .map(|(f, m)| (f - centroid).powi(3) * m)
            .sum::<f64>()
            / total_mag;
        let m4 = freqs
            .iter()
            .zip(&mags)
            .map(|(f, m)| (f - centroid).powi(4) * m)
            .sum::<f64>()
            / total_mag;
        (m3 / spread.powi(3), m4 / spread.powi(4))
    };

    let slope = least_squares_slope(&freqs, &mags);

    let tail_mag: f64 = mags[1..].iter().sum();
    let decrease = if tail_mag == 0.0 {
        0.0
    } else {
        mags[1..]
            .iter()
            .enumerate()
            .map(|(i, m)| (m - mags[0]) / (i + 1) as f64)
            .sum::<f64>()
            / tail_mag
    };

    let entropy = -powers
        .iter()
        .map(|p| p / total_power)
        .filter(|p| *p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
        / (mags.len() as f64).ln();

    // 1 − Pearson correlation of the first and second half-spectrum; an odd
    // middle bin is dropped. Zero-variance halves define the correlation as 0.
    let half = mags.len() / 2;
    let variation = 1.0 - pearson(&mags[..half], &mags[mags.len() - half..]);

    let roll_off = cumulative_power_frequency(&powers, &freqs, 0.85 * total_power);
    let roll_on = cumulative_power_frequency(&powers, &freqs, 0.05 * total_power);
    let power_bandwidth = roll_off - roll_on;
    let max_psd = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut out = vec![
        fundamental_frequency,
        max_power_frequency,
        median_frequency,
        centroid,
        spread,
        skewness,
        kurtosis,
        slope,
        decrease,
        entropy,
        variation,
        roll_off,
        roll_on,
        power_bandwidth,
        max_psd,
    ];

    // Equal-width frequency bands over [0, fs/2]; bin k lands in band
    // ⌊2k·bands/N⌋ (the Nyquist bin is clamped into the last band).
    let mut band_sum = vec![0.0f64; bands];
    let mut band_count = vec![0usize; bands];
    let mut band_max = vec![0.0f64; bands];
    for (k, &m) in mags.iter().enumerate() {
        let b = (2 * k * bands / n).min(bands - 1);
        band_sum[b] += m;
        band_count[b] += 1;
        band_max[b] = band_max[b].max(m);
    }
    out.extend(
        band_sum
            .iter()
            .zip(&band_count)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }),
    );
    out.extend(band_max);
    debug_assert_eq!(out.len(), out_len);
    Ok(out)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Smallest f_k at which cumulative power reaches `threshold`.
fn cumulative_power_frequency(powers: &[f64], freqs: &[f64], threshold: f64) -> f64 {
    let mut acc = 0.0;
    for (p, f) in powers.iter().zip(freqs) {
        acc += p;
        if acc >= threshold {
            return *f;
        }
    }
    *freqs.last().expect("non-empty spectrum")
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    const FS: f64 = 100_000.0;

    fn by_name(values: &[f64], name: &str, bands: usize) -> f64 {
        let names = spectral_names(bands);
        values[names.iter().position(|n| n == name).unwrap()]
    }

    fn sine(n: usize, freq: f64, amplitude: f64) -> Vec<f64> {
        (0..n)
            .map(|t| amplitude * (std::f64::consts::TAU * freq * t as f64 / FS).sin())
            .collect()
    }

    #[test]
    fn catalog_size_matches_band_count() {
        assert_eq!(spectral_names(DEFAULT_BANDS).len(), 335);
        let f = spectral_features(&sine(64, FS / 16.0, 1.0), FS, DEFAULT_BANDS).unwrap();
        assert_eq!(f.len(), 335);
    }

    #[test]
    fn zero_signal_yields_all_zeros() {
        let f = spectral_features(&vec![0.0; 64], FS, 8).unwrap();
        assert_eq!(f, vec![0.0; 15 + 16]);
    }

    #[test]
    fn pure_sine_frequency_recovered_within_one_bin() {
        let n = 1024;
        let f0 = FS / 16.0;
        let bin = FS / n as f64;
        let f = spectral_features(&sine(n, f0, 0.7), FS, DEFAULT_BANDS).unwrap();
        assert!((by_name(&f, "fundamental_frequency", DEFAULT_BANDS) - f0).abs() <= bin);
        assert!((by_name(&f, "max_power_frequency", DEFAULT_BANDS) - f0).abs() <= bin);
        assert!((by_name(&f, "centroid", DEFAULT_BANDS) - f0).abs() <= bin);
        assert!((by_name(&f, "median_frequency", DEFAULT_BANDS) - f0).abs() <= bin);
    }

    #[test]
    fn sine_amplitude_lands_in_band_20() {
        // fs/16 is bin 64 of 513, i.e. band ⌊2·64·160/1024⌋ = 20.
        let n = 1024;
        let a = 0.9;
        let f = spectral_features(&sine(n, FS / 16.0, a), FS, DEFAULT_BANDS).unwrap();
        let names = spectral_names(DEFAULT_BANDS);
        let means: Vec<f64> = names
            .iter()
            .zip(&f)
            .filter(|(n, _)| n.starts_with("band_mean_"))
            .map(|(_, v)| *v)
            .collect();
        assert_eq!(argmax(&means), 20);
        // The peak bin magnitude is N/2·a.
        assert_relative_eq!(
            by_name(&f, "band_max_020", DEFAULT_BANDS),
            n as f64 / 2.0 * a,
            max_relative = 1e-9
        );
    }

    #[test]
    fn white_noise_entropy_is_near_one() {
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1024)
                .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
                .collect();
            let f = spectral_features(&x, FS, DEFAULT_BANDS).unwrap();
            total += by_name(&f, "entropy", DEFAULT_BANDS);
        }
        assert!(total / 20.0 >= 0.9, "mean entropy {}", total / 20.0);
    }

    #[test]
    fn shift_leaves_spectral_features_unchanged() {
        // A broadband trace keeps every ratio-form feature numerically
        // stable, so mean removal cancels the shift to high precision.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = sine(128, FS / 8.0, 1.3)
            .into_iter()
            .map(|v| v + rng.gen_range(-0.5..0.5))
            .collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 42.0).collect();
        let a = spectral_features(&x, FS, 16).unwrap();
        let b = spectral_features(&shifted, FS, 16).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn scaling_preserves_ratio_features() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * 2.0).collect();
        let a = spectral_features(&x, FS, 16).unwrap();
        let b = spectral_features(&scaled, FS, 16).unwrap();
        for name in ["centroid", "entropy", "spread", "roll_off", "roll_on"] {
            assert_relative_eq!(
                by_name(&a, name, 16),
                by_name(&b, name, 16),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn all_features_finite_on_hard_inputs() {
        // Constant traces leave sub-epsilon residue after mean removal; the
        // features must still all be finite.
        for trace in [vec![0.1; 64], vec![-3.7; 100], sine(64, FS / 16.0, 1e-20)] {
            let f = spectral_features(&trace, FS, 16).unwrap();
            assert!(f.iter().all(|v| v.is_finite()), "{f:?}");
        }
    }

    #[test]
    fn rejects_short_traces_and_bad_args() {
        assert!(spectral_features(&[1.0; 7], FS, 8).is_err());
        assert!(spectral_features(&[1.0; 64], FS, 0).is_err());
        assert!(spectral_features(&[1.0; 64], 0.0, 8).is_err());
    }
}
