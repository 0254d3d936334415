//! Synthetic dataset generator with a planted latent-quality signal.
//!
//! Real monitoring data for this problem is proprietary, so the generator
//! stands in for it while preserving the property the pipeline is built
//! around: a per-sample latent quality scalar `q` influences the final
//! roughness *only* through the amplitude of the sensor traces. Laser
//! parameters alone therefore cannot explain the full target variance,
//! while sensor-derived features can.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    Experiment, LaserParameters, LayerRecording, PreprocessingTechnique, Sample, MIN_TRACE_LENGTH,
};
use crate::error::{Error, Result};
use crate::rng;

/// Coefficients of the planted generative model for `final_roughness`:
///
/// `final = 0.4·initial + c1·E^0.6 + c2·a + ε`
///
/// with energy term `E = pulse_fluence·laser_power/num_layers` and trace
/// amplitude `a = s0·(1 + 0.5·q)` clamped at zero, `q ~ Normal(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerativeCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub s0: f64,
}

impl Default for GenerativeCoefficients {
    fn default() -> Self {
        GenerativeCoefficients {
            c1: 0.8,
            c2: 1.5,
            s0: 1.0,
        }
    }
}

/// Configuration of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub experiments_per_technique: usize,
    pub samples_per_experiment: usize,
    pub trace_length: usize,
    /// Photodiode sampling rate in Hz.
    pub sample_rate: f64,
    /// Scale of the irreducible target noise ε ~ Normal(0, noise_scale·b_t),
    /// where b_t is the per-technique baseline roughness.
    pub noise_scale: f64,
    pub coefficients: GenerativeCoefficients,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 42,
            experiments_per_technique: 2,
            samples_per_experiment: 99,
            trace_length: 1024,
            sample_rate: 100_000.0,
            noise_scale: 0.05,
            coefficients: GenerativeCoefficients::default(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.experiments_per_technique == 0 {
            return Err(Error::validation("experiments_per_technique must be positive"));
        }
        if self.samples_per_experiment == 0 {
            return Err(Error::validation("samples_per_experiment must be positive"));
        }
        if self.trace_length < MIN_TRACE_LENGTH {
            return Err(Error::validation(format!(
                "trace_length must be at least {MIN_TRACE_LENGTH}"
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::validation("sample_rate must be positive"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::validation("noise_scale must be non-negative"));
        }
        Ok(())
    }
}

/// Baseline roughness b_t in µm for each preprocessing technique.
pub fn baseline_roughness(technique: PreprocessingTechnique) -> f64 {
    match technique {
        PreprocessingTechnique::Milling => 12.0,
        PreprocessingTechnique::Grinding => 6.0,
        PreprocessingTechnique::Polishing => 0.8,
        PreprocessingTechnique::DieEdm => 4.0,
        PreprocessingTechnique::WireEdm => 2.0,
    }
}

/// Generates the full dataset: `experiments_per_technique` experiments for
/// each of the five techniques, in canonical technique order.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Experiment>> {
    config.validate()?;
    let specs: Vec<(PreprocessingTechnique, usize)> = PreprocessingTechnique::ALL
        .iter()
        .flat_map(|&t| (0..config.experiments_per_technique).map(move |k| (t, k)))
        .collect();
    specs
        .par_iter()
        .map(|&(technique, k)| generate_experiment(config, technique, k))
        .collect()
}

/// Generates one experiment: `k` is its index within the technique.
///
/// Every sample draws from a stream keyed on (seed, global experiment index,
/// sample index), so generation order and worker count do not affect the
/// output.
pub fn generate_experiment(
    config: &SyntheticConfig,
    technique: PreprocessingTechnique,
    k: usize,
) -> Result<Experiment> {
    config.validate()?;
    if k >= config.experiments_per_technique {
        return Err(Error::validation(format!(
            "experiment index {k} out of range (experiments_per_technique={})",
            config.experiments_per_technique
        )));
    }
    let exp_index = technique.index() * config.experiments_per_technique + k;
    let id = format!("{}-{k:02}", technique.as_str());
    let samples: Vec<Sample> = (0..config.samples_per_experiment)
        .into_par_iter()
        .map(|s| generate_sample(config, technique, &id, exp_index, s as u32))
        .collect();
    Ok(Experiment {
        id,
        technique,
        samples,
    })
}

fn generate_sample(
    config: &SyntheticConfig,
    technique: PreprocessingTechnique,
    experiment_id: &str,
    exp_index: usize,
    sample_id: u32,
) -> Sample {
    let mut rng = rng::stream(config.seed, &[exp_index as u64, sample_id as u64]);
    let b_t = baseline_roughness(technique);
    let coeff = config.coefficients;

    let pulses_per_burst = [1u32, 2, 4, 8][rng.gen_range(0..4)];
    let pulse_fluence = rng.gen_range(0.5..5.0);
    let laser_power = rng.gen_range(5.0..50.0);
    let num_layers: u32 = rng.gen_range(8..=64);
    let params = LaserParameters {
        pulses_per_burst,
        pulse_fluence,
        laser_power,
        num_layers,
    };

    let u: f64 = rng.gen_range(-1.0..1.0);
    let initial_roughness = (b_t * (1.0 + 0.2 * u)).max(0.05);

    let q: f64 = StandardNormal.sample(&mut rng);
    let energy = pulse_fluence * laser_power / num_layers as f64;
    let amplitude = (coeff.s0 * (1.0 + 0.5 * q)).max(0.0);

    let eps = if config.noise_scale > 0.0 {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * config.noise_scale * b_t
    } else {
        0.0
    };
    let final_roughness =
        (0.4 * initial_roughness + coeff.c1 * energy.powf(0.6) + coeff.c2 * amplitude + eps)
            .max(0.01);

    let base = generate_traces(config, &mut rng, pulses_per_burst, pulse_fluence, energy, amplitude);

    let n_layers = num_layers as usize;
    let layers = (0..n_layers)
        .map(|layer_index| {
            // The last layer carries the full signal; earlier layers are
            // attenuated copies (attenuation layer_index/num_layers).
            let scale = if layer_index == n_layers - 1 {
                1.0
            } else {
                layer_index as f64 / n_layers as f64
            };
            LayerRecording {
                layer_index,
                ir: base.ir.iter().map(|v| v * scale).collect(),
                acoustic: base.acoustic.iter().map(|v| v * scale).collect(),
                reflection: base.reflection.iter().map(|v| v * scale).collect(),
                visible: base.visible.iter().map(|v| v * scale).collect(),
                sample_rate: config.sample_rate,
            }
        })
        .collect();

    Sample {
        experiment_id: experiment_id.to_string(),
        sample_id,
        params,
        initial_roughness,
        final_roughness,
        layers,
    }
}

struct BaseTraces {
    ir: Vec<f64>,
    acoustic: Vec<f64>,
    reflection: Vec<f64>,
    visible: Vec<f64>,
}

/// Final-layer waveforms. The IR channel is a sine at fs/16 whose amplitude
/// is the planted quality signal `a`; the other channels carry parameter
/// echoes and noise.
fn generate_traces(
    config: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
    pulses_per_burst: u32,
    pulse_fluence: f64,
    energy: f64,
    amplitude: f64,
) -> BaseTraces {
    let n = config.trace_length;
    let fs = config.sample_rate;
    let f0 = fs / 16.0;
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut ir = Vec::with_capacity(n);
    for t in 0..n {
        let eta: f64 = StandardNormal.sample(rng);
        let s = amplitude * (std::f64::consts::TAU * f0 * t as f64 / fs + phase).sin();
        ir.push(s + 0.2 * energy * eta);
    }

    // Equally spaced exponentially decaying bursts, one per pulse.
    let bursts = pulses_per_burst as usize;
    let tau = n as f64 / 32.0;
    let mut acoustic = vec![0.0; n];
    for b in 0..bursts {
        let start = b * n / bursts;
        for t in start..n {
            acoustic[t] += (-((t - start) as f64) / tau).exp();
        }
    }
    for v in acoustic.iter_mut() {
        let eta: f64 = StandardNormal.sample(rng);
        *v += 0.1 * eta;
    }

    let mut reflection = Vec::with_capacity(n);
    for _ in 0..n {
        let eta: f64 = StandardNormal.sample(rng);
        reflection.push(0.1 * pulse_fluence + 0.05 * eta);
    }

    let mut visible = Vec::with_capacity(n);
    for t in 0..n {
        let eta: f64 = StandardNormal.sample(rng);
        visible.push(0.1 * eta + 0.05 * t as f64 / n as f64);
    }

    BaseTraces {
        ir,
        acoustic,
        reflection,
        visible,
    }
}

/// Closed-form target of the planted model, for oracle checks: with
/// `noise_scale = 0` the generated `final_roughness` equals
/// `planted_target(initial, E, a)` exactly.
pub fn planted_target(
    coeff: &GenerativeCoefficients,
    initial_roughness: f64,
    energy: f64,
    amplitude: f64,
) -> f64 {
    (0.4 * initial_roughness + coeff.c1 * energy.powf(0.6) + coeff.c2 * amplitude).max(0.01)
}
