//! Dataset directory: `manifest.json`, `samples.csv`, `frames.bin` (f32 LE,
//! frame after frame) and one trace CSV per auxiliary flight.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use wpnav_core::envelope::{DatasetManifest, Sample, DATASET_FORMAT_VERSION};
use wpnav_core::Dataset;

use super::trace::{read_trace, write_trace};
use super::{read_bytes, read_json, write_bytes, write_json};
use crate::error::{Classify, CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SAMPLES: &str = "samples.csv";
pub const FRAMES: &str = "frames.bin";
pub const TRACES: &str = "traces";
const SAMPLES_HEADER: &str = "frame_ref,label,path_ordinal,step_ordinal";

pub fn trace_name(aux_index: usize) -> String {
    format!("aux-{aux_index:04}.csv")
}

pub fn samples_to_csv(samples: &[Sample]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        writeln!(out, "{},{},{},{}", s.frame_ref, s.label, s.path_ordinal, s.step_ordinal).expect("String write");
    }
    out
}

pub fn samples_from_csv(text: &str) -> anyhow::Result<Vec<Sample>> {
    let mut lines = text.lines();
    if lines.next() != Some(SAMPLES_HEADER) {
        bail!("samples header must be `{SAMPLES_HEADER}`");
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                bail!("sample row {}: expected 4 fields", i + 1);
            }
            Ok(Sample {
                frame_ref: f[0].parse()?,
                label: f[1].parse()?,
                path_ordinal: f[2].parse()?,
                step_ordinal: f[3].parse()?,
            })
        })
        .collect()
}

pub fn frames_to_bytes(frames: &[f32]) -> Vec<u8> {
    frames.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn frames_from_bytes(bytes: &[u8]) -> anyhow::Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        bail!("frame store length {} is not a multiple of 4", bytes.len());
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    write_json(&dir.join(MANIFEST), &ds.manifest)?;
    write_bytes(&dir.join(SAMPLES), samples_to_csv(&ds.samples).as_bytes())?;
    write_bytes(&dir.join(FRAMES), &frames_to_bytes(&ds.frames))?;
    for (i, trace) in ds.traces.iter().enumerate() {
        write_trace(&dir.join(TRACES).join(trace_name(i)), trace)?;
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST), "dataset manifest")?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(CliError::validation(anyhow::anyhow!(
            "dataset format version {} is not supported (expected {DATASET_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let samples_path = dir.join(SAMPLES);
    let text = String::from_utf8(read_bytes(&samples_path, "dataset samples")?).validation()?;
    let samples = samples_from_csv(&text).with_context(|| format!("parsing {}", samples_path.display())).validation()?;
    let frames = frames_from_bytes(&read_bytes(&dir.join(FRAMES), "dataset frames")?).validation()?;
    let traces = (0..manifest.auxiliary.len())
        .map(|i| read_trace(&dir.join(TRACES).join(trace_name(i))))
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset { manifest, samples, frames, traces };
    ds.validate().validation()?;
    Ok(ds)
}
