//! Discrete Fourier transform for real input.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform;
//! other lengths fall back to the direct O(N²) sum. Default trace lengths
//! are powers of two, so the fallback is rarely exercised.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    fn add(self, other: Complex) -> Complex {
        Complex {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    fn sub(self, other: Complex) -> Complex {
        Complex {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }
}

/// Forward DFT of a real signal: X_k = Σ_t x_t·exp(−2πi·kt/N).
pub fn dft(x: &[f64]) -> Vec<Complex> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    if n.is_power_of_two() {
        fft_radix2(x)
    } else {
        dft_direct(x)
    }
}

/// Magnitudes |X_k| for k = 0..⌊N/2⌋ (the one-sided spectrum).
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let spectrum = dft(x);
    let half = x.len() / 2;
    spectrum[..=half].iter().map(|c| c.abs()).collect()
}

fn fft_radix2(x: &[f64]) -> Vec<Complex> {
    let n = x.len();
    let mut buf: Vec<Complex> = (0..n)
        .map(|i| Complex::new(x[bit_reverse(i, n.trailing_zeros())], 0.0))
        .collect();
    let mut len = 2;
    while len <= n {
        let angle = -std::f64::consts::TAU / len as f64;
        let w_len = Complex::new(angle.cos(), angle.sin());
        for chunk in buf.chunks_mut(len) {
            let mut w = Complex::new(1.0, 0.0);
            let half = len / 2;
            for i in 0..half {
                let even = chunk[i];
                let odd = chunk[i + half].mul(w);
                chunk[i] = even.add(odd);
                chunk[i + half] = even.sub(odd);
                w = w.mul(w_len);
            }
        }
        len *= 2;
    }
    buf
}

fn bit_reverse(i: usize, bits: u32) -> usize {
    i.reverse_bits() >> (usize::BITS - bits)
}

fn dft_direct(x: &[f64]) -> Vec<Complex> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex::ZERO;
            for (t, &v) in x.iter().enumerate() {
                let angle = -std::f64::consts::TAU * (k * t % n) as f64 / n as f64;
                acc = acc.add(Complex::new(v * angle.cos(), v * angle.sin()));
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        for c in dft(&x) {
            assert_relative_eq!(c.re, 1.0, max_relative = 1e-12);
            assert_relative_eq!(c.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sine_concentrates_in_one_bin_pair() {
        let n = 64;
        let k0 = 4;
        let x: Vec<f64> = (0..n)
            .map(|t| (std::f64::consts::TAU * k0 as f64 * t as f64 / n as f64).sin())
            .collect();
        let spectrum = dft(&x);
        for (k, c) in spectrum.iter().enumerate() {
            let expected = if k == k0 || k == n - k0 { n as f64 / 2.0 } else { 0.0 };
            assert_relative_eq!(c.abs(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn radix2_matches_direct_dft() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = fft_radix2(&x);
        let slow = dft_direct(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-9);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-9);
        }
    }

    #[test]
    fn non_power_of_two_lengths_work() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spectrum = dft(&x);
        assert_eq!(spectrum.len(), 12);
        // DC bin is the plain sum.
        let sum: f64 = x.iter().sum();
        assert_relative_eq!(spectrum[0].re, sum, max_relative = 1e-12);
    }

    #[test]
    fn parseval_energy_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for &n in &[8usize, 64, 100, 1024] {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let time_energy: f64 = x.iter().map(|v| v * v).sum();
            let freq_energy: f64 =
                dft(&x).iter().map(|c| c.norm_sq()).sum::<f64>() / n as f64;
            assert_relative_eq!(time_energy, freq_energy, max_relative = 1e-9);
        }
    }
}
