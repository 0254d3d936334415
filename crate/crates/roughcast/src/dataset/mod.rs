//! Experiment / sample / sensor-trace data model, on-disk format, and the
//! synthetic dataset generator.
//!
//! A dataset is a set of experiments, one per workpiece. Each experiment
//! carries a preprocessing technique and a list of sub-experiment samples;
//! each sample records its laser parameters, initial and final surface
//! roughness, and the four photodiode traces captured for every laser layer.

mod io;
mod synthetic;

pub use io::{fmt_float, load_dataset, write_dataset};
pub use synthetic::{
    baseline_roughness, generate_experiment, generate_synthetic, planted_target,
    GenerativeCoefficients, SyntheticConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Machining method applied to a workpiece before laser structuring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessingTechnique {
    Milling,
    Grinding,
    Polishing,
    DieEdm,
    WireEdm,
}

impl PreprocessingTechnique {
    pub const ALL: [PreprocessingTechnique; 5] = [
        PreprocessingTechnique::Milling,
        PreprocessingTechnique::Grinding,
        PreprocessingTechnique::Polishing,
        PreprocessingTechnique::DieEdm,
        PreprocessingTechnique::WireEdm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PreprocessingTechnique::Milling => "milling",
            PreprocessingTechnique::Grinding => "grinding",
            PreprocessingTechnique::Polishing => "polishing",
            PreprocessingTechnique::DieEdm => "die_edm",
            PreprocessingTechnique::WireEdm => "wire_edm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown preprocessing technique `{s}`")))
    }

    /// Position in the canonical technique ordering (also the table row order).
    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|t| t == self).unwrap()
    }
}

impl std::fmt::Display for PreprocessingTechnique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the four photodiode channels recorded per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorChannel {
    Ir,
    Acoustic,
    Reflection,
    Visible,
}

impl SensorChannel {
    pub const ALL: [SensorChannel; 4] = [
        SensorChannel::Ir,
        SensorChannel::Acoustic,
        SensorChannel::Reflection,
        SensorChannel::Visible,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SensorChannel::Ir => "ir",
            SensorChannel::Acoustic => "acoustic",
            SensorChannel::Reflection => "reflection",
            SensorChannel::Visible => "visible",
        }
    }
}

/// Laser parameters varied across the sub-experiments of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParameters {
    /// Pulses per burst (count).
    pub pulses_per_burst: u32,
    /// Pulse fluence in J/cm².
    pub pulse_fluence: f64,
    /// Laser power in W.
    pub laser_power: f64,
    /// Number of laser scans over the area.
    pub num_layers: u32,
}

impl LaserParameters {
    pub fn validate(&self) -> Result<()> {
        if self.pulses_per_burst == 0 {
            return Err(Error::validation("pulses_per_burst must be positive"));
        }
        if !(self.pulse_fluence > 0.0 && self.pulse_fluence.is_finite()) {
            return Err(Error::validation("pulse_fluence must be positive and finite"));
        }
        if !(self.laser_power > 0.0 && self.laser_power.is_finite()) {
            return Err(Error::validation("laser_power must be positive and finite"));
        }
        if self.num_layers == 0 {
            return Err(Error::validation("num_layers must be positive"));
        }
        Ok(())
    }
}

/// Photodiode traces recorded during one laser layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecording {
    pub layer_index: usize,
    pub ir: Vec<f64>,
    pub acoustic: Vec<f64>,
    pub reflection: Vec<f64>,
    pub visible: Vec<f64>,
    /// Sampling rate in Hz.
    pub sample_rate: f64,
}

/// Minimum per-layer trace length required by the feature extractors.
pub const MIN_TRACE_LENGTH: usize = 8;

impl LayerRecording {
    pub fn channel(&self, channel: SensorChannel) -> &[f64] {
        match channel {
            SensorChannel::Ir => &self.ir,
            SensorChannel::Acoustic => &self.acoustic,
            SensorChannel::Reflection => &self.reflection,
            SensorChannel::Visible => &self.visible,
        }
    }

    pub fn trace_length(&self) -> usize {
        self.ir.len()
    }

    pub fn validate(&self, context: &str) -> Result<()> {
        let n = self.ir.len();
        for ch in SensorChannel::ALL {
            let len = self.channel(ch).len();
            if len != n {
                return Err(Error::validation(format!(
                    "{context} layer {}: channel `{}` has length {len}, expected {n}",
                    self.layer_index,
                    ch.as_str()
                )));
            }
        }
        if n < MIN_TRACE_LENGTH {
            return Err(Error::validation(format!(
                "{context} layer {}: trace length {n} below minimum {MIN_TRACE_LENGTH}",
                self.layer_index
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::validation(format!(
                "{context} layer {}: sample_rate must be positive",
                self.layer_index
            )));
        }
        for ch in SensorChannel::ALL {
            if let Some(t) = self.channel(ch).iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "{context} layer {}: non-finite value in channel `{}` at t={t}",
                    self.layer_index,
                    ch.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// One sub-experiment: parameters, roughness, and per-layer sensor traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub experiment_id: String,
    pub sample_id: u32,
    pub params: LaserParameters,
    /// Surface roughness before laser structuring, in µm.
    pub initial_roughness: f64,
    /// Surface roughness after laser structuring, in µm. The prediction target.
    pub final_roughness: f64,
    /// Recordings ordered by `layer_index`, one per laser scan.
    pub layers: Vec<LayerRecording>,
}

impl Sample {
    pub fn validate(&self) -> Result<()> {
        let ctx = format!("experiment `{}` sample {}", self.experiment_id, self.sample_id);
        self.params.validate()?;
        if self.layers.len() != self.params.num_layers as usize {
            return Err(Error::validation(format!(
                "{ctx}: {} layers but num_layers={}",
                self.layers.len(),
                self.params.num_layers
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.layer_index != i {
                return Err(Error::validation(format!(
                    "{ctx}: layer at position {i} has index {}",
                    layer.layer_index
                )));
            }
            layer.validate(&ctx)?;
        }
        for (name, v) in [
            ("initial_roughness", self.initial_roughness),
            ("final_roughness", self.final_roughness),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "{ctx}: {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Returns the final-layer recording, the one the feature extraction uses.
pub fn last_layer(sample: &Sample) -> Result<&LayerRecording> {
    sample.layers.last().ok_or_else(|| {
        Error::validation(format!(
            "experiment `{}` sample {} has no layers",
            sample.experiment_id, sample.sample_id
        ))
    })
}

/// A workpiece experiment: one preprocessing technique, many samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: String,
    pub technique: PreprocessingTechnique,
    pub samples: Vec<Sample>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for sample in &self.samples {
            if sample.experiment_id != self.id {
                return Err(Error::validation(format!(
                    "experiment `{}`: sample {} carries experiment_id `{}`",
                    self.id, sample.sample_id, sample.experiment_id
                )));
            }
            if !seen.insert(sample.sample_id) {
                return Err(Error::validation(format!(
                    "experiment `{}`: duplicate sample_id {}",
                    self.id, sample.sample_id
                )));
            }
            sample.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(n: usize, index: usize) -> LayerRecording {
        LayerRecording {
            layer_index: index,
            ir: vec![0.0; n],
            acoustic: vec![0.0; n],
            reflection: vec![0.0; n],
            visible: vec![0.0; n],
            sample_rate: 1000.0,
        }
    }

    fn sample(num_layers: u32) -> Sample {
        Sample {
            experiment_id: "e0".to_string(),
            sample_id: 0,
            params: LaserParameters {
                pulses_per_burst: 2,
                pulse_fluence: 1.0,
                laser_power: 10.0,
                num_layers,
            },
            initial_roughness: 1.0,
            final_roughness: 2.0,
            layers: (0..num_layers as usize).map(|i| layer(16, i)).collect(),
        }
    }

    #[test]
    fn last_layer_returns_final_index() {
        let s = sample(5);
        assert_eq!(last_layer(&s).unwrap().layer_index, 4);
        let s = sample(1);
        assert_eq!(last_layer(&s).unwrap().layer_index, 0);
    }

    #[test]
    fn last_layer_rejects_empty() {
        let mut s = sample(1);
        s.layers.clear();
        assert!(last_layer(&s).is_err());
    }

    #[test]
    fn validate_catches_channel_length_mismatch() {
        let mut s = sample(2);
        s.layers[1].acoustic.pop();
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("acoustic"), "{err}");
        assert!(err.contains("layer 1"), "{err}");
    }

    #[test]
    fn validate_catches_layer_count_mismatch() {
        let mut s = sample(3);
        s.layers.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn validate_catches_non_finite_trace() {
        let mut s = sample(1);
        s.layers[0].ir[3] = f64::NAN;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("non-finite"), "{err}");
    }

    #[test]
    fn experiment_rejects_duplicate_sample_ids() {
        let mut e = Experiment {
            id: "e0".to_string(),
            technique: PreprocessingTechnique::Milling,
            samples: vec![sample(1), sample(1)],
        };
        assert!(e.validate().is_err());
        e.samples[1].sample_id = 1;
        assert!(e.validate().is_ok());
    }

    #[test]
    fn technique_round_trips_through_names() {
        for t in PreprocessingTechnique::ALL {
            assert_eq!(PreprocessingTechnique::parse(t.as_str()).unwrap(), t);
        }
        assert!(PreprocessingTechnique::parse("laser").is_err());
    }
}
