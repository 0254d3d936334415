//! Trace feature extraction.
//!
//! Each sensor channel of a sample's final layer yields 389 features — 14
//! temporal, 40 statistical, and 335 spectral — for 1556 per sample with the
//! default catalog. The catalog order is canonical and version-stable:
//! channel-major (ir, acoustic, reflection, visible), domain order temporal,
//! statistical, spectral within each channel.

pub mod fft;
pub mod spectral;
pub mod statistical;
pub mod temporal;
mod util;

pub use spectral::{spectral_features, spectral_names, DEFAULT_BANDS};
pub use statistical::{statistical_features, statistical_names};
pub use temporal::{temporal_features, TEMPORAL_NAMES};

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{last_layer, Experiment, Sample, SensorChannel};
use crate::error::{Error, Result};
use crate::preprocess::SampleRef;

/// Feature domain per the temporal/statistical/spectral split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureDomain {
    Temporal,
    Statistical,
    Spectral,
}

impl FeatureDomain {
    /// Segment used inside feature names (`ir.stat.mean`).
    fn name_segment(&self) -> &'static str {
        match self {
            FeatureDomain::Temporal => "temporal",
            FeatureDomain::Statistical => "stat",
            FeatureDomain::Spectral => "spectral",
        }
    }
}

/// One entry of the canonical feature catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub domain: FeatureDomain,
    pub channel: SensorChannel,
    /// Position in the canonical ordering.
    pub index: usize,
}

/// Identifier binding feature vectors to the catalog that produced them.
pub fn catalog_id(bands: usize) -> String {
    format!("roughcast-v1-b{bands}")
}

/// The canonical catalog for a given spectral band count.
pub fn catalog_with_bands(bands: usize) -> Vec<FeatureDescriptor> {
    let mut entries = Vec::new();
    for channel in SensorChannel::ALL {
        let blocks: [(FeatureDomain, Vec<String>); 3] = [
            (
                FeatureDomain::Temporal,
                TEMPORAL_NAMES.iter().map(|s| s.to_string()).collect(),
            ),
            (FeatureDomain::Statistical, statistical_names()),
            (FeatureDomain::Spectral, spectral_names(bands)),
        ];
        for (domain, names) in blocks {
            for base in names {
                let index = entries.len();
                entries.push(FeatureDescriptor {
                    name: format!("{}.{}.{}", channel.as_str(), domain.name_segment(), base),
                    domain,
                    channel,
                    index,
                });
            }
        }
    }
    entries
}

/// The default 1556-entry catalog (160 spectral bands).
pub fn catalog() -> Vec<FeatureDescriptor> {
    catalog_with_bands(DEFAULT_BANDS)
}

/// Extracted features of one sample, bound to a catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub catalog_id: String,
    pub values: Vec<f64>,
}

/// Extracts the default catalog from a sample's final layer.
pub fn extract_sample(sample: &Sample) -> Result<FeatureVector> {
    extract_sample_with_bands(sample, DEFAULT_BANDS)
}

/// Extracts the catalog with `bands` spectral bands per channel.
pub fn extract_sample_with_bands(sample: &Sample, bands: usize) -> Result<FeatureVector> {
    sample.validate()?;
    let layer = last_layer(sample)?;
    let per_channel = TEMPORAL_NAMES.len() + 40 + 15 + 2 * bands;
    let mut values = Vec::with_capacity(4 * per_channel);
    for channel in SensorChannel::ALL {
        let trace = layer.channel(channel);
        values.extend(temporal_features(trace)?);
        values.extend(statistical_features(trace)?);
        values.extend(spectral_features(trace, layer.sample_rate, bands)?);
    }
    Ok(FeatureVector {
        catalog_id: catalog_id(bands),
        values,
    })
}

/// Laser-parameter input columns, in canonical order.
pub const PARAM_COLUMNS: [&str; 5] = [
    "param.pulses_per_burst",
    "param.pulse_fluence",
    "param.laser_power",
    "param.num_layers",
    "param.initial_roughness",
];

/// Target column name in the exported feature matrix.
pub const TARGET_COLUMN: &str = "target.final_roughness";

/// Flat model-input matrix for a dataset: laser parameters followed by the
/// trace features, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<SampleRef>,
    /// Technique of each row's owning experiment, for per-setting grouping.
    pub techniques: Vec<crate::dataset::PreprocessingTechnique>,
    /// `param.*` columns then catalog feature names.
    pub columns: Vec<String>,
    /// n_samples × columns.len().
    pub inputs: Array2<f64>,
    /// `final_roughness` per row, in µm.
    pub targets: Vec<f64>,
}

impl FeatureTable {
    /// Number of leading parameter columns.
    pub const N_PARAMS: usize = PARAM_COLUMNS.len();
}

/// Extracts the feature table for a whole dataset (rows in dataset order).
pub fn extract_table(experiments: &[Experiment], bands: usize) -> Result<FeatureTable> {
    let samples: Vec<(&Experiment, &Sample)> = experiments
        .iter()
        .flat_map(|e| e.samples.iter().map(move |s| (e, s)))
        .collect();
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|(_, s)| {
            let features = extract_sample_with_bands(s, bands)?;
            let mut row = Vec::with_capacity(PARAM_COLUMNS.len() + features.values.len());
            row.push(s.params.pulses_per_burst as f64);
            row.push(s.params.pulse_fluence);
            row.push(s.params.laser_power);
            row.push(s.params.num_layers as f64);
            row.push(s.initial_roughness);
            row.extend(features.values);
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut columns: Vec<String> = PARAM_COLUMNS.iter().map(|s| s.to_string()).collect();
    columns.extend(catalog_with_bands(bands).into_iter().map(|d| d.name));
    let n_cols = columns.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let inputs = Array2::from_shape_vec((samples.len(), n_cols), flat)
        .map_err(|e| Error::validation(format!("feature matrix shape: {e}")))?;

    Ok(FeatureTable {
        ids: samples
            .iter()
            .map(|(e, s)| SampleRef::new(e.id.clone(), s.sample_id))
            .collect(),
        techniques: samples.iter().map(|(e, _)| e.technique).collect(),
        columns,
        inputs,
        targets: samples.iter().map(|(_, s)| s.final_roughness).collect(),
    })
}

/// Writes the feature matrix as CSV: `param.*` columns, catalog features,
/// then a final target column. Floats carry 17 significant digits.
pub fn write_feature_csv(table: &FeatureTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = table.columns.join(",");
    header.push(',');
    header.push_str(TARGET_COLUMN);
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for (row, target) in table.inputs.rows().into_iter().zip(&table.targets) {
        let mut line = String::new();
        for v in row.iter() {
            line.push_str(&crate::dataset::fmt_float(*v));
            line.push(',');
        }
        line.push_str(&crate::dataset::fmt_float(*target));
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature-matrix CSV back as raw columns and rows.
pub fn read_feature_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(format!("{}: empty file", path.display())))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut flat = Vec::new();
    let mut n_rows = 0;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::format(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                i + 2,
                columns.len(),
                fields.len()
            )));
        }
        for tok in fields {
            let v: f64 = tok.parse().map_err(|_| {
                Error::format(format!("{}:{}: invalid float `{tok}`", path.display(), i + 2))
            })?;
            flat.push(v);
        }
        n_rows += 1;
    }
    let rows = Array2::from_shape_vec((n_rows, columns.len()), flat)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{
        generate_synthetic, LaserParameters, LayerRecording, PreprocessingTechnique,
        SyntheticConfig,
    };

    fn sine_sample(f0_fraction: f64) -> Sample {
        let n = 1024;
        let fs = 100_000.0;
        let ir: Vec<f64> = (0..n)
            .map(|t| (std::f64::consts::TAU * f0_fraction * t as f64).sin())
            .collect();
        let flat = vec![0.5; n];
        Sample {
            experiment_id: "e0".to_string(),
            sample_id: 0,
            params: LaserParameters {
                pulses_per_burst: 1,
                pulse_fluence: 1.0,
                laser_power: 10.0,
                num_layers: 1,
            },
            initial_roughness: 1.0,
            final_roughness: 2.0,
            layers: vec![LayerRecording {
                layer_index: 0,
                ir,
                acoustic: flat.clone(),
                reflection: flat.clone(),
                visible: flat,
                sample_rate: fs,
            }],
        }
    }

    #[test]
    fn catalog_has_1556_unique_ordered_entries() {
        let cat = catalog();
        assert_eq!(cat.len(), 1556);
        assert_eq!(cat[0].channel, SensorChannel::Ir);
        assert_eq!(cat[0].domain, FeatureDomain::Temporal);
        let names: std::collections::HashSet<_> = cat.iter().map(|d| &d.name).collect();
        assert_eq!(names.len(), 1556);
        for (i, d) in cat.iter().enumerate() {
            assert_eq!(d.index, i);
        }
        // Channel-major blocks of 389, domains ordered within each block.
        assert_eq!(cat[388].channel, SensorChannel::Ir);
        assert_eq!(cat[389].channel, SensorChannel::Acoustic);
        assert_eq!(cat[389].domain, FeatureDomain::Temporal);
        assert_eq!(cat[14].name, "ir.stat.mean");
        assert_eq!(cat[54].name, "ir.spectral.fundamental_frequency");
    }

    #[test]
    fn extract_sample_is_1556_finite_values() {
        let config = SyntheticConfig {
            seed: 3,
            experiments_per_technique: 1,
            samples_per_experiment: 1,
            trace_length: 1024,
            ..SyntheticConfig::default()
        };
        let experiments = generate_synthetic(&config).unwrap();
        let fv = extract_sample(&experiments[0].samples[0]).unwrap();
        assert_eq!(fv.values.len(), 1556);
        assert!(fv.values.iter().all(|v| v.is_finite()));
        assert_eq!(fv.catalog_id, catalog_id(DEFAULT_BANDS));
    }

    #[test]
    fn sine_ir_layer_recovers_fundamental() {
        let sample = sine_sample(1.0 / 16.0);
        let fv = extract_sample(&sample).unwrap();
        let cat = catalog();
        let idx = cat
            .iter()
            .position(|d| d.name == "ir.spectral.fundamental_frequency")
            .unwrap();
        let fs = 100_000.0;
        assert!((fv.values[idx] - fs / 16.0).abs() <= fs / 1024.0);
    }

    #[test]
    fn only_the_final_layer_matters() {
        let config = SyntheticConfig {
            seed: 9,
            experiments_per_technique: 1,
            samples_per_experiment: 1,
            trace_length: 64,
            ..SyntheticConfig::default()
        };
        let experiments = generate_synthetic(&config).unwrap();
        let sample = &experiments[0].samples[0];
        assert!(sample.layers.len() >= 2, "need a non-final layer to perturb");
        let mut altered = sample.clone();
        for v in altered.layers[0].ir.iter_mut() {
            *v += 3.5;
        }
        assert_eq!(
            extract_sample(sample).unwrap(),
            extract_sample(&altered).unwrap()
        );
    }

    #[test]
    fn table_and_csv_round_trip() {
        let config = SyntheticConfig {
            seed: 4,
            experiments_per_technique: 1,
            samples_per_experiment: 2,
            trace_length: 32,
            ..SyntheticConfig::default()
        };
        let experiments = generate_synthetic(&config).unwrap();
        let table = extract_table(&experiments, 8).unwrap();
        assert_eq!(table.inputs.nrows(), 10);
        assert_eq!(table.columns.len(), 5 + 4 * (14 + 40 + 15 + 16));
        assert_eq!(table.columns[0], "param.pulses_per_burst");
        assert_eq!(table.techniques[0], PreprocessingTechnique::Milling);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        write_feature_csv(&table, &path).unwrap();
        let (columns, rows) = read_feature_csv(&path).unwrap();
        assert_eq!(columns.len(), table.columns.len() + 1);
        assert_eq!(columns.last().unwrap(), TARGET_COLUMN);
        assert_eq!(rows.nrows(), 10);
        for (i, row) in rows.rows().into_iter().enumerate() {
            for (j, v) in row.iter().take(table.columns.len()).enumerate() {
                assert_eq!(*v, table.inputs[[i, j]], "row {i} col {j}");
            }
            assert_eq!(row[columns.len() - 1], table.targets[i]);
        }
    }
}
