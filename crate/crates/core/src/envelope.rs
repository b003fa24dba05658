//! Navigation-envelope augmentation and dataset assembly.
//!
//! Each auxiliary flight is an oracle-steered rollout whose every step is
//! knocked off course by a uniform position offset and a uniform heading
//! offset. The recorded label is always the clean oracle command from the
//! pose actually reached, so noise shapes the visited states but never the
//! targets. Noise for auxiliary flight `a`, attempt `k`, step `s` is drawn
//! from ChaCha8 slot `s` of stream `(ENVELOPE, a, k)` under the envelope
//! seed and can be replayed independently of the flight.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{relative_yaw, GeometryError, Pose, WaypointPath};
use crate::rng::{domain, stream_id, symmetric, Substream};
use crate::sim::{
    path_start, rollout_disturbed, Disturbance, OracleController, RolloutTrace, SimConfig,
    SimError, Status,
};
use crate::world::{render, BlockWorld, CameraSpec, WorldError};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("invalid envelope config: {0}")]
    InvalidConfig(&'static str),
    #[error("auxiliary index {index} out of range for {count} auxiliary paths")]
    AuxIndexOutOfRange { index: usize, count: usize },
    #[error("waypoint {index} ({x:.2}, {y:.2}) lies outside the world extent")]
    WorldPathMismatch { index: usize, x: f64, y: f64 },
    #[error("auxiliary flight {0} diverged on every regeneration attempt")]
    TooManyDivergences(usize),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How envelope noise is applied to an auxiliary flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Fresh offsets at every step.
    #[default]
    PerStep,
    /// A single offset applied to the start pose; the flight itself is clean.
    PerPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeConfig {
    pub auxiliary_path_count: usize,
    /// Half-width of the uniform per-axis position offset, m.
    pub position_noise: f64,
    /// Half-width of the uniform heading offset, rad.
    pub yaw_noise: f64,
    pub seed: u64,
    pub mode: NoiseMode,
    /// Extra attempts allowed for a diverging auxiliary flight.
    pub max_regenerations: usize,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            auxiliary_path_count: 32,
            position_noise: 1.0,
            yaw_noise: 0.1,
            seed: 0,
            mode: NoiseMode::PerStep,
            max_regenerations: 8,
        }
    }
}

impl EnvelopeConfig {
    pub fn validate(&self) -> Result<(), EnvelopeError> {
        if self.auxiliary_path_count == 0 {
            return Err(EnvelopeError::InvalidConfig("auxiliary_path_count must be at least 1"));
        }
        if !(self.position_noise >= 0.0) || !self.position_noise.is_finite() {
            return Err(EnvelopeError::InvalidConfig("position_noise must be non-negative"));
        }
        if !(self.yaw_noise >= 0.0) || !self.yaw_noise.is_finite() {
            return Err(EnvelopeError::InvalidConfig("yaw_noise must be non-negative"));
        }
        if self.auxiliary_path_count > u32::MAX as usize || self.max_regenerations >= u32::MAX as usize
        {
            return Err(EnvelopeError::InvalidConfig("counts exceed stream addressing"));
        }
        Ok(())
    }

    /// The noise stream of one attempt at one auxiliary flight.
    pub fn substream(&self, aux_index: usize, attempt: usize) -> Substream {
        Substream::new(self.seed, stream_id(domain::ENVELOPE, aux_index as u32, attempt as u32))
    }

    /// The disturbance drawn at `step`. Replays exactly what a flight used.
    pub fn perturbation(&self, aux_index: usize, attempt: usize, step: usize) -> Disturbance {
        noise_draw(self.substream(aux_index, attempt), step as u64, self.position_noise, self.yaw_noise)
    }
}

/// Three uniforms from one slot mapped to `(dx, dy, dyaw)`.
pub(crate) fn noise_draw(stream: Substream, counter: u64, position: f64, yaw: f64) -> Disturbance {
    let u: [f64; 3] = stream.uniforms(counter);
    Disturbance {
        dx: symmetric(u[0], position),
        dy: symmetric(u[1], position),
        dyaw: symmetric(u[2], yaw),
    }
}

/// One labelled frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub frame_ref: usize,
    /// Relative yaw from the recorded pose to its target waypoint, rad.
    pub label: f64,
    pub path_ordinal: usize,
    pub step_ordinal: usize,
}

/// Result of one auxiliary flight. Sample `frame_ref`s index the flight's
/// own trace rows until [`build_dataset`] rebases them.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxFlight {
    pub aux_index: usize,
    /// Attempts used, including the accepted one.
    pub attempts: usize,
    pub trace: RolloutTrace,
    pub samples: Vec<Sample>,
}

/// Flies auxiliary path `aux_index` with the oracle under envelope noise.
/// A diverged flight is discarded and re-flown on the next attempt stream.
pub fn perturb_rollout(
    path: &WaypointPath,
    config: &EnvelopeConfig,
    aux_index: usize,
    world: &BlockWorld,
    camera: &CameraSpec,
    sim: &SimConfig,
) -> Result<AuxFlight, EnvelopeError> {
    config.validate()?;
    if aux_index >= config.auxiliary_path_count {
        return Err(EnvelopeError::AuxIndexOutOfRange {
            index: aux_index,
            count: config.auxiliary_path_count,
        });
    }
    for attempt in 0..=config.max_regenerations {
        let mut start = path_start(path, sim);
        let per_step = config.mode == NoiseMode::PerStep;
        if !per_step {
            let d = config.perturbation(aux_index, attempt, 0);
            let mut shifted = Pose::new(start.x + d.dx, start.y + d.dy, start.z, start.yaw() + d.dyaw)?;
            core::mem::swap(&mut start, &mut shifted);
        }
        let trace = rollout_disturbed(path, &mut OracleController, world, camera, sim, start, |s| {
            if per_step {
                config.perturbation(aux_index, attempt, s)
            } else {
                Disturbance::ZERO
            }
        })
        .map_err(|a| a.error)?;
        if trace.status() == Status::Diverged {
            continue;
        }
        let samples = label_trace(path, &trace, aux_index)?;
        return Ok(AuxFlight { aux_index, attempts: attempt + 1, trace, samples });
    }
    Err(EnvelopeError::TooManyDivergences(aux_index))
}

/// One sample per non-terminal trace row, labelled from the recorded pose.
fn label_trace(
    path: &WaypointPath,
    trace: &RolloutTrace,
    path_ordinal: usize,
) -> Result<Vec<Sample>, EnvelopeError> {
    trace
        .rows
        .iter()
        .filter(|r| r.status == Status::Running)
        .enumerate()
        .map(|(i, row)| {
            let target = path.waypoints()[row.next_waypoint_index];
            Ok(Sample {
                frame_ref: i,
                label: relative_yaw(&row.pose, target)?,
                path_ordinal,
                step_ordinal: row.step,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSummary {
    pub aux_index: usize,
    pub samples: usize,
    pub attempts: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub path_id: String,
    pub world_seed: u64,
    pub camera: CameraSpec,
    pub envelope: EnvelopeConfig,
    pub sim: SimConfig,
    pub sample_count: usize,
    /// `[channels, height, width]`.
    pub frame_shape: [usize; 3],
    pub auxiliary: Vec<AuxSummary>,
    /// Diverged flights that were discarded and re-flown.
    pub regenerations: usize,
}

impl DatasetManifest {
    pub fn frame_len(&self) -> usize {
        self.frame_shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
    /// Contiguous frame store, `frame_len` values per frame.
    pub frames: Vec<f32>,
    /// Accepted trace of each auxiliary flight, by auxiliary index.
    pub traces: Vec<RolloutTrace>,
}

impl Dataset {
    pub fn frame_len(&self) -> usize {
        self.manifest.frame_len()
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len() / self.frame_len().max(1)
    }

    pub fn frame(&self, frame_ref: usize) -> &[f32] {
        let n = self.frame_len();
        &self.frames[frame_ref * n..(frame_ref + 1) * n]
    }

    /// Structural invariants: counts agree, references resolve, and step
    /// ordinals increase within each auxiliary path.
    pub fn validate(&self) -> Result<(), EnvelopeError> {
        let bad = |m: String| Err(EnvelopeError::Inconsistent(m));
        if self.manifest.sample_count != self.samples.len() {
            return bad(format!(
                "manifest lists {} samples, found {}",
                self.manifest.sample_count,
                self.samples.len()
            ));
        }
        if !self.frames.len().is_multiple_of(self.frame_len().max(1)) {
            return bad("frame store length is not a multiple of the frame size".into());
        }
        let frames = self.frame_count();
        let mut last: Option<(usize, usize)> = None;
        for (i, s) in self.samples.iter().enumerate() {
            if s.frame_ref >= frames {
                return bad(format!("sample {i} references missing frame {}", s.frame_ref));
            }
            if !(s.label > -core::f64::consts::PI && s.label <= core::f64::consts::PI) {
                return bad(format!("sample {i} label {} outside (-π, π]", s.label));
            }
            if let Some((p, step)) = last {
                if p == s.path_ordinal && s.step_ordinal <= step {
                    return bad(format!("sample {i} step ordinal does not increase"));
                }
            }
            last = Some((s.path_ordinal, s.step_ordinal));
        }
        Ok(())
    }
}

/// Flies every auxiliary path and renders one frame per recorded step.
pub fn build_dataset(
    path: &WaypointPath,
    world: &BlockWorld,
    envelope: &EnvelopeConfig,
    camera: &CameraSpec,
    sim: &SimConfig,
) -> Result<Dataset, EnvelopeError> {
    envelope.validate()?;
    camera.validate()?;
    sim.validate()?;
    if let Some((index, w)) =
        path.waypoints().iter().enumerate().find(|(_, w)| !world.contains(w.x, w.y))
    {
        return Err(EnvelopeError::WorldPathMismatch { index, x: w.x, y: w.y });
    }

    let mut samples = Vec::new();
    let mut frames = Vec::new();
    let mut traces = Vec::new();
    let mut auxiliary = Vec::new();
    for aux in 0..envelope.auxiliary_path_count {
        let flight = perturb_rollout(path, envelope, aux, world, camera, sim)?;
        let base = samples.len();
        for s in &flight.samples {
            let row = &flight.trace.rows[s.step_ordinal];
            frames.extend_from_slice(&render(world, &row.pose, camera).pixels);
            samples.push(Sample { frame_ref: base + s.frame_ref, ..*s });
        }
        auxiliary.push(AuxSummary {
            aux_index: aux,
            samples: flight.samples.len(),
            attempts: flight.attempts,
            status: flight.trace.status(),
        });
        traces.push(flight.trace);
    }

    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        path_id: path.id().into(),
        world_seed: world.seed,
        camera: *camera,
        envelope: envelope.clone(),
        sim: sim.clone(),
        sample_count: samples.len(),
        frame_shape: [1, camera.height, camera.width],
        regenerations: auxiliary.iter().map(|a| a.attempts - 1).sum(),
        auxiliary,
    };
    Ok(Dataset { manifest, samples, frames, traces })
}

/// A run of consecutive samples from one auxiliary path; the label is the
/// last sample's.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub frame_refs: Vec<usize>,
    pub label: f64,
    pub path_ordinal: usize,
}

/// Sliding windows of `timesteps` consecutive samples that never cross an
/// auxiliary-path boundary.
///
/// # Panics
///
/// If `timesteps` is zero.
pub fn sequence_windows(dataset: &Dataset, timesteps: usize) -> Vec<Window> {
    assert!(timesteps >= 1, "window length must be at least 1");
    let mut out = Vec::new();
    let samples = &dataset.samples;
    let mut start = 0;
    while start < samples.len() {
        let ordinal = samples[start].path_ordinal;
        let end = samples[start..]
            .iter()
            .position(|s| s.path_ordinal != ordinal)
            .map_or(samples.len(), |n| start + n);
        let run = &samples[start..end];
        for w in run.windows(timesteps) {
            out.push(Window {
                frame_refs: w.iter().map(|s| s.frame_ref).collect(),
                label: w[timesteps - 1].label,
                path_ordinal: ordinal,
            });
        }
        start = end;
    }
    out
}
