//! On-disk dataset layout.
//!
//! ```text
//! <root>/manifest.json                          {experiment_id, technique, num_samples} list
//! <root>/<experiment_id>/samples.csv            one row per sample: parameters + roughness
//! <root>/<experiment_id>/sensors/<id>.csv       long-format traces, rows ordered by (layer, t)
//! <root>/<experiment_id>/sensors/<id>.meta.json sample_rate and trace_length
//! ```
//!
//! All floats are serialized with 17 significant digits so that
//! `load_dataset(write_dataset(d))` reproduces every numeric value exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Experiment, LaserParameters, LayerRecording, PreprocessingTechnique, Sample};
use crate::error::{Error, Result};

const SAMPLES_HEADER: &str =
    "sample_id,pulses_per_burst,pulse_fluence,laser_power,num_layers,initial_roughness,final_roughness";
const SENSORS_HEADER: &str = "layer,t,ir,acoustic,reflection,visible";

/// Formats a float with 17 significant digits (round-trip exact for f64).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    experiment_id: String,
    technique: PreprocessingTechnique,
    num_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SensorMeta {
    sample_rate: f64,
    trace_length: usize,
}

/// Writes a dataset under `root`, creating directories as needed.
pub fn write_dataset(experiments: &[Experiment], root: &Path) -> Result<()> {
    for e in experiments {
        e.validate()?;
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let manifest: Vec<ManifestEntry> = experiments
        .iter()
        .map(|e| ManifestEntry {
            experiment_id: e.id.clone(),
            technique: e.technique,
            num_samples: e.samples.len(),
        })
        .collect();
    write_json(&root.join("manifest.json"), &manifest)?;

    for e in experiments {
        let exp_dir = root.join(&e.id);
        let sensors_dir = exp_dir.join("sensors");
        fs::create_dir_all(&sensors_dir).map_err(|err| Error::io(&sensors_dir, err))?;

        let samples_path = exp_dir.join("samples.csv");
        let mut w = buf_writer(&samples_path)?;
        writeln_io(&mut w, &samples_path, SAMPLES_HEADER)?;
        for s in &e.samples {
            let row = format!(
                "{},{},{},{},{},{},{}",
                s.sample_id,
                s.params.pulses_per_burst,
                fmt_float(s.params.pulse_fluence),
                fmt_float(s.params.laser_power),
                s.params.num_layers,
                fmt_float(s.initial_roughness),
                fmt_float(s.final_roughness),
            );
            writeln_io(&mut w, &samples_path, &row)?;
        }
        w.flush().map_err(|err| Error::io(&samples_path, err))?;

        for s in &e.samples {
            write_sensor_files(s, &sensors_dir)?;
        }
    }
    Ok(())
}

fn write_sensor_files(sample: &Sample, sensors_dir: &Path) -> Result<()> {
    let csv_path = sensors_dir.join(format!("{}.csv", sample.sample_id));
    let mut w = buf_writer(&csv_path)?;
    writeln_io(&mut w, &csv_path, SENSORS_HEADER)?;
    for layer in &sample.layers {
        for t in 0..layer.trace_length() {
            let row = format!(
                "{},{},{},{},{},{}",
                layer.layer_index,
                t,
                fmt_float(layer.ir[t]),
                fmt_float(layer.acoustic[t]),
                fmt_float(layer.reflection[t]),
                fmt_float(layer.visible[t]),
            );
            writeln_io(&mut w, &csv_path, &row)?;
        }
    }
    w.flush().map_err(|err| Error::io(&csv_path, err))?;

    let first = sample.layers.first().ok_or_else(|| {
        Error::validation(format!(
            "experiment `{}` sample {} has no layers",
            sample.experiment_id, sample.sample_id
        ))
    })?;
    let meta = SensorMeta {
        sample_rate: first.sample_rate,
        trace_length: first.trace_length(),
    };
    write_json(&sensors_dir.join(format!("{}.meta.json", sample.sample_id)), &meta)
}

/// Loads and fully validates a dataset written by [`write_dataset`].
pub fn load_dataset(root: &Path) -> Result<Vec<Experiment>> {
    let manifest_path = root.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::io(
            &manifest_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no dataset manifest"),
        ));
    }
    let manifest: Vec<ManifestEntry> = read_json(&manifest_path)?;

    let mut experiments = Vec::with_capacity(manifest.len());
    for entry in &manifest {
        let exp_dir = root.join(&entry.experiment_id);
        let samples = load_samples(entry, &exp_dir)?;
        if samples.len() != entry.num_samples {
            return Err(Error::format(format!(
                "experiment `{}`: manifest promises {} samples, samples.csv has {}",
                entry.experiment_id,
                entry.num_samples,
                samples.len()
            )));
        }
        let experiment = Experiment {
            id: entry.experiment_id.clone(),
            technique: entry.technique,
            samples,
        };
        experiment.validate()?;
        experiments.push(experiment);
    }
    Ok(experiments)
}

fn load_samples(entry: &ManifestEntry, exp_dir: &Path) -> Result<Vec<Sample>> {
    let samples_path = exp_dir.join("samples.csv");
    let text = read_file(&samples_path)?;
    let mut lines = text.lines();
    expect_header(lines.next(), SAMPLES_HEADER, &samples_path)?;

    let mut samples = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::validation(format!(
                "experiment `{}` samples.csv line {}: expected 7 fields, got {}",
                entry.experiment_id,
                line_no + 2,
                fields.len()
            )));
        }
        let sample_id = parse_int(fields[0], &samples_path, line_no + 2)? as u32;
        let params = LaserParameters {
            pulses_per_burst: parse_int(fields[1], &samples_path, line_no + 2)? as u32,
            pulse_fluence: parse_float(fields[2], &samples_path, line_no + 2)?,
            laser_power: parse_float(fields[3], &samples_path, line_no + 2)?,
            num_layers: parse_int(fields[4], &samples_path, line_no + 2)? as u32,
        };
        let initial_roughness = parse_float(fields[5], &samples_path, line_no + 2)?;
        let final_roughness = parse_float(fields[6], &samples_path, line_no + 2)?;
        let layers = load_sensor_traces(entry, exp_dir, sample_id)?;
        samples.push(Sample {
            experiment_id: entry.experiment_id.clone(),
            sample_id,
            params,
            initial_roughness,
            final_roughness,
            layers,
        });
    }
    Ok(samples)
}

fn load_sensor_traces(
    entry: &ManifestEntry,
    exp_dir: &Path,
    sample_id: u32,
) -> Result<Vec<LayerRecording>> {
    let sensors_dir = exp_dir.join("sensors");
    let meta: SensorMeta = read_json(&sensors_dir.join(format!("{sample_id}.meta.json")))?;
    let csv_path = sensors_dir.join(format!("{sample_id}.csv"));
    let text = read_file(&csv_path)?;
    let mut lines = text.lines();
    expect_header(lines.next(), SENSORS_HEADER, &csv_path)?;

    let ctx = format!("experiment `{}` sample {sample_id}", entry.experiment_id);
    let mut layers: Vec<LayerRecording> = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            let layer = fields
                .first()
                .and_then(|f| f.parse::<usize>().ok())
                .map(|l| l.to_string())
                .unwrap_or_else(|| "?".to_string());
            return Err(Error::validation(format!(
                "{ctx} layer {layer}: sensor row {} has {} fields, expected 6 \
                 (truncated or corrupt channel data)",
                line_no + 2,
                fields.len()
            )));
        }
        let layer = parse_int(fields[0], &csv_path, line_no + 2)?;
        let t = parse_int(fields[1], &csv_path, line_no + 2)?;
        if layer == layers.len() && t == 0 {
            layers.push(LayerRecording {
                layer_index: layer,
                ir: Vec::with_capacity(meta.trace_length),
                acoustic: Vec::with_capacity(meta.trace_length),
                reflection: Vec::with_capacity(meta.trace_length),
                visible: Vec::with_capacity(meta.trace_length),
                sample_rate: meta.sample_rate,
            });
        } else if layer + 1 != layers.len() || t != layers[layer].ir.len() {
            return Err(Error::format(format!(
                "{}: row {} out of (layer, t) order",
                csv_path.display(),
                line_no + 2
            )));
        }
        let rec = layers.last_mut().expect("layer pushed above");
        for (channel, field) in [
            (&mut rec.ir, fields[2]),
            (&mut rec.acoustic, fields[3]),
            (&mut rec.reflection, fields[4]),
            (&mut rec.visible, fields[5]),
        ] {
            let v = parse_float(field, &csv_path, line_no + 2)?;
            channel.push(v);
        }
    }
    for layer in &layers {
        if layer.trace_length() != meta.trace_length {
            return Err(Error::validation(format!(
                "{ctx} layer {}: trace length {} does not match meta trace_length {}",
                layer.layer_index,
                layer.trace_length(),
                meta.trace_length
            )));
        }
        layer.validate(&ctx)?;
    }
    Ok(layers)
}

fn buf_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn writeln_io(w: &mut impl Write, path: &Path, line: &str) -> Result<()> {
    writeln!(w, "{line}").map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn expect_header(line: Option<&str>, expected: &str, path: &Path) -> Result<()> {
    match line {
        Some(h) if h == expected => Ok(()),
        Some(h) => Err(Error::format(format!(
            "{}: bad header `{h}`, expected `{expected}`",
            path.display()
        ))),
        None => Err(Error::format(format!("{}: empty file", path.display()))),
    }
}

fn parse_float(tok: &str, path: &Path, line_no: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::format(format!("{}:{line_no}: invalid float `{tok}`", path.display())))?;
    if !v.is_finite() {
        return Err(Error::validation(format!(
            "{}:{line_no}: non-finite value `{tok}`",
            path.display()
        )));
    }
    Ok(v)
}

fn parse_int(tok: &str, path: &Path, line_no: usize) -> Result<usize> {
    tok.parse().map_err(|_| {
        Error::format(format!(
            "{}:{line_no}: invalid integer `{tok}`",
            path.display()
        ))
    })
}
