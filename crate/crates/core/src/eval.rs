//! Closed-loop evaluation of controllers on the true path.
//!
//! Each trial flies the unperturbed path with per-step in-flight noise and,
//! optionally, a perturbed start pose. Noise comes from streams keyed by
//! `(eval_seed, trial)`, so every controller evaluated with the same config
//! faces the same disturbances.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::noise_draw;
use crate::geometry::{
    mean_cross_track_distance, mean_waypoint_min_distance, path_distance, sum_angle_change, wrap_angle,
    WaypointPath,
};
use crate::model::{Model, RegressorKind};
use crate::rng::{domain, stream_id, Substream};
use crate::sim::{
    path_start, rollout_disturbed, ConstantController, Controller, Observation, RolloutTrace, SimConfig, SimError,
    Status,
};
use crate::world::{BlockWorld, CameraSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid eval config: {0}")]
    InvalidConfig(&'static str),
    #[error("no checkpoint for variant(s): {}", .0.join(", "))]
    MissingCheckpoint(Vec<String>),
    #[error("model frame size {model:?} does not match camera {camera:?}")]
    CameraMismatch { model: (usize, usize), camera: (usize, usize) },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub random_start: bool,
    pub start_position_noise: f64,
    pub start_yaw_noise: f64,
    pub inflight_position_noise: f64,
    pub inflight_yaw_noise: f64,
    pub trials: usize,
    pub eval_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            random_start: false,
            start_position_noise: 1.0,
            start_yaw_noise: 0.1,
            inflight_position_noise: 1.0,
            inflight_yaw_noise: 0.1,
            trials: 5,
            eval_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let noise = [
            self.start_position_noise,
            self.start_yaw_noise,
            self.inflight_position_noise,
            self.inflight_yaw_noise,
        ];
        if noise.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(EvalError::InvalidConfig("noise magnitudes must be finite and non-negative"));
        }
        if self.trials == 0 {
            return Err(EvalError::InvalidConfig("trials must be at least 1"));
        }
        Ok(())
    }

    /// Same config with all noise switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            random_start: false,
            inflight_position_noise: 0.0,
            inflight_yaw_noise: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Completed,
    Diverged,
    TimedOut,
    /// The controller failed; the partial trace is kept.
    Aborted,
}

impl TrialOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialOutcome::Completed => "Completed",
            TrialOutcome::Diverged => "Diverged",
            TrialOutcome::TimedOut => "TimedOut",
            TrialOutcome::Aborted => "Aborted",
        }
    }

    fn counts_towards_means(&self) -> bool {
        matches!(self, TrialOutcome::Completed | TrialOutcome::TimedOut)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub outcome: TrialOutcome,
    pub steps: usize,
    pub mean_waypoint_min_distance: Option<f64>,
    pub mean_cross_track_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub path_id: String,
    pub variant: String,
    pub random_start: bool,
    pub path_distance: f64,
    pub sum_angle_change: f64,
    pub trials: Vec<TrialReport>,
    /// Mean over trials that neither diverged nor aborted.
    pub mean_waypoint_min_distance: Option<f64>,
    pub mean_cross_track_distance: Option<f64>,
    pub completed_trials: usize,
    pub diverged_trials: usize,
}

impl MetricsReport {
    pub fn all_completed(&self) -> bool {
        self.completed_trials == self.trials.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub traces: Vec<RolloutTrace>,
}

/// Drives the drone with a trained model. GRU variants see the last `T`
/// frames of the live rollout, padded with blank frames at the start.
pub struct ModelController<'m> {
    model: &'m Model,
    history: Vec<Vec<f32>>,
}

impl<'m> ModelController<'m> {
    pub fn new(model: &'m Model) -> Self {
        let blank = model.encode(&alloc::vec![0.0; model.frame_len()]).expect("frame length matches the model");
        Self { model, history: alloc::vec![blank; model.timesteps()] }
    }
}

impl Controller for ModelController<'_> {
    fn command(&mut self, obs: &Observation<'_>) -> Result<f64, String> {
        let frame = obs.frame.ok_or("model controller needs frames")?;
        let features = self.model.encode(&frame.pixels).map_err(|e| e.to_string())?;
        self.history.remove(0);
        self.history.push(features);
        let window: Vec<&[f32]> = self.history.iter().map(|f| f.as_slice()).collect();
        let y = self.model.forward_features(&window);
        if !y.is_finite() {
            return Err(alloc::format!("model produced non-finite output {y}"));
        }
        Ok(wrap_angle(y))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs `config.trials` rollouts, building a fresh controller per trial.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_with<'c>(
    variant: &str,
    mut make_controller: impl FnMut() -> Box<dyn Controller + 'c>,
    path: &WaypointPath,
    world: &BlockWorld,
    camera: &CameraSpec,
    sim: &SimConfig,
    config: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    config.validate()?;
    sim.validate()?;
    let mut trials = Vec::with_capacity(config.trials);
    let mut traces = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut start = path_start(path, sim);
        if config.random_start {
            let s = Substream::new(config.eval_seed, stream_id(domain::EVAL_START, trial as u32, 0));
            let d = noise_draw(s, 0, config.start_position_noise, config.start_yaw_noise);
            start.x += d.dx;
            start.y += d.dy;
            start.set_yaw(wrap_angle(start.yaw() + d.dyaw));
        }
        let inflight = Substream::new(config.eval_seed, stream_id(domain::EVAL_INFLIGHT, trial as u32, 0));
        let (p, q) = (config.inflight_position_noise, config.inflight_yaw_noise);
        let mut controller = make_controller();
        let result = rollout_disturbed(path, controller.as_mut(), world, camera, sim, start, |step| {
            noise_draw(inflight, step as u64, p, q)
        });
        let (trace, outcome, error) = match result {
            Ok(trace) => {
                let outcome = match trace.status() {
                    Status::Completed => TrialOutcome::Completed,
                    Status::Diverged => TrialOutcome::Diverged,
                    Status::TimedOut => TrialOutcome::TimedOut,
                    Status::Running => unreachable!("rollout returned before a terminal status"),
                };
                (trace, outcome, None)
            }
            Err(aborted) => match aborted.error {
                SimError::Controller(msg) => (aborted.trace, TrialOutcome::Aborted, Some(msg)),
                other => return Err(other.into()),
            },
        };
        let positions = trace.positions();
        trials.push(TrialReport {
            trial,
            outcome,
            steps: trace.steps(),
            mean_waypoint_min_distance: mean_waypoint_min_distance(path, &positions).ok(),
            mean_cross_track_distance: mean_cross_track_distance(path, &positions).ok(),
            error,
        });
        traces.push(trace);
    }
    let eligible = || trials.iter().filter(|t| t.outcome.counts_towards_means());
    let report = MetricsReport {
        path_id: path.id().into(),
        variant: variant.into(),
        random_start: config.random_start,
        path_distance: path_distance(path),
        sum_angle_change: sum_angle_change(path),
        mean_waypoint_min_distance: mean(eligible().filter_map(|t| t.mean_waypoint_min_distance)),
        mean_cross_track_distance: mean(eligible().filter_map(|t| t.mean_cross_track_distance)),
        completed_trials: trials.iter().filter(|t| t.outcome == TrialOutcome::Completed).count(),
        diverged_trials: trials.iter().filter(|t| t.outcome == TrialOutcome::Diverged).count(),
        trials,
    };
    Ok(EvalOutcome { report, traces })
}

/// Evaluates a trained model as the controller.
pub fn evaluate(
    model: &Model,
    path: &WaypointPath,
    world: &BlockWorld,
    camera: &CameraSpec,
    sim: &SimConfig,
    config: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    if (model.frame_width, model.frame_height) != (camera.width, camera.height) {
        return Err(EvalError::CameraMismatch {
            model: (model.frame_width, model.frame_height),
            camera: (camera.width, camera.height),
        });
    }
    let label = model.kind().to_string();
    evaluate_with(&label, || Box::new(ModelController::new(model)), path, world, camera, sim, config)
}

/// Label used for the constant-zero reference controller.
pub const BLIND_BASELINE: &str = "Blind";

/// Evaluates the controller that always commands zero turn.
pub fn evaluate_blind(
    path: &WaypointPath,
    world: &BlockWorld,
    camera: &CameraSpec,
    sim: &SimConfig,
    config: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    evaluate_with(BLIND_BASELINE, || Box::new(ConstantController(0.0)), path, world, camera, sim, config)
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub path_id: String,
    pub variant: String,
    pub random_start: bool,
    pub mwmd: Option<f64>,
    pub mctd: Option<f64>,
    pub completed_trials: usize,
    pub diverged_trials: usize,
    pub trials: usize,
}

impl From<&MetricsReport> for ComparisonRow {
    fn from(r: &MetricsReport) -> Self {
        Self {
            path_id: r.path_id.clone(),
            variant: r.variant.clone(),
            random_start: r.random_start,
            mwmd: r.mean_waypoint_min_distance,
            mctd: r.mean_cross_track_distance,
            completed_trials: r.completed_trials,
            diverged_trials: r.diverged_trials,
            trials: r.trials.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<MetricsReport>,
}

/// Evaluates each requested variant with and without random starts,
/// followed by the blind baseline when `with_baseline` is set.
#[allow(clippy::too_many_arguments)]
pub fn compare_regressors(
    path: &WaypointPath,
    world: &BlockWorld,
    camera: &CameraSpec,
    sim: &SimConfig,
    config: &EvalConfig,
    variants: &[RegressorKind],
    models: &[Model],
    with_baseline: bool,
) -> Result<Comparison, EvalError> {
    let missing: Vec<String> = variants
        .iter()
        .filter(|k| !models.iter().any(|m| m.kind() == **k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingCheckpoint(missing));
    }
    let mut reports = Vec::new();
    for kind in variants {
        let model = models.iter().find(|m| m.kind() == *kind).expect("checked above");
        for random_start in [false, true] {
            let cfg = EvalConfig { random_start, ..config.clone() };
            reports.push(evaluate(model, path, world, camera, sim, &cfg)?.report);
        }
    }
    if with_baseline {
        for random_start in [false, true] {
            let cfg = EvalConfig { random_start, ..config.clone() };
            reports.push(evaluate_blind(path, world, camera, sim, &cfg)?.report);
        }
    }
    Ok(Comparison { rows: reports.iter().map(ComparisonRow::from).collect(), reports })
}
