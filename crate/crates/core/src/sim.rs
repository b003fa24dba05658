//! Kinematic drone: constant altitude and speed, yaw-only steering, motion
//! strictly along the heading.
//!
//! A step turns first (the command is clipped to `max_yaw_rate·dt`) and then
//! translates `speed·dt` along the new heading. Intermediate waypoints are
//! passed once the drone is within `waypoint_radius`; the final waypoint
//! additionally requires the drone to be level with or beyond it along the
//! last segment, so a run covers the full path length.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    cross_track_distance, point_segment_distance, relative_yaw, wrap_angle, GeometryError, Point2,
    Pose, WaypointPath,
};
use crate::world::{render, BlockWorld, CameraSpec, Frame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation already terminated with status {0:?}")]
    NotRunning(Status),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error("yaw command is not finite")]
    NonFiniteCommand,
    #[error("start pose is {0:.2} m from the first segment, beyond the divergence limit")]
    StartTooFar(f64),
    #[error("controller failed: {0}")]
    Controller(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Forward speed, m/s.
    pub speed: f64,
    /// Flight altitude, m.
    pub altitude: f64,
    /// Control period, s.
    pub dt: f64,
    /// Maximum yaw rate, rad/s.
    pub max_yaw_rate: f64,
    /// Distance at which a waypoint counts as reached, m.
    pub waypoint_radius: f64,
    pub max_steps: usize,
    /// Cross-track distance beyond which a run is declared diverged, m.
    pub divergence_limit: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            speed: 1.0,
            altitude: 5.0,
            dt: 0.25,
            max_yaw_rate: 1.0,
            waypoint_radius: 2.0,
            max_steps: 4000,
            divergence_limit: 20.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.speed) {
            return Err(SimError::InvalidConfig("speed must be positive"));
        }
        if !pos(self.dt) {
            return Err(SimError::InvalidConfig("dt must be positive"));
        }
        if !pos(self.altitude) {
            return Err(SimError::InvalidConfig("altitude must be positive"));
        }
        if !(self.max_yaw_rate >= 0.0) || !self.max_yaw_rate.is_finite() {
            return Err(SimError::InvalidConfig("max_yaw_rate must be non-negative"));
        }
        if !pos(self.waypoint_radius) {
            return Err(SimError::InvalidConfig("waypoint_radius must be positive"));
        }
        if !(self.divergence_limit > self.waypoint_radius) {
            return Err(SimError::InvalidConfig("divergence_limit must exceed waypoint_radius"));
        }
        Ok(())
    }

    pub fn step_length(&self) -> f64 {
        self.speed * self.dt
    }

    pub fn max_turn(&self) -> f64 {
        self.max_yaw_rate * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Running,
    Completed,
    Diverged,
    TimedOut,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Running => "Running",
            Status::Completed => "Completed",
            Status::Diverged => "Diverged",
            Status::TimedOut => "TimedOut",
        }
    }
}

impl core::str::FromStr for Status {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "Running" => Status::Running,
            "Completed" => Status::Completed,
            "Diverged" => Status::Diverged,
            "TimedOut" => Status::TimedOut,
            _ => return Err(()),
        })
    }
}

/// External perturbation applied inside one step: a position offset before
/// translation and a heading offset after the commanded turn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Disturbance {
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
}

impl Disturbance {
    pub const ZERO: Disturbance = Disturbance { dx: 0.0, dy: 0.0, dyaw: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub pose: Pose,
    pub next_waypoint_index: usize,
    pub step_count: usize,
    pub status: Status,
}

impl SimState {
    /// Initial state at `start`; waypoints already within reach are passed.
    pub fn start(start: Pose, path: &WaypointPath, config: &SimConfig) -> Self {
        let mut state =
            SimState { pose: start, next_waypoint_index: 1, step_count: 0, status: Status::Running };
        state.advance_waypoints(path, config);
        if state.next_waypoint_index == path.len() {
            state.status = Status::Completed;
        } else if config.max_steps == 0 {
            state.status = Status::TimedOut;
        }
        state
    }

    /// The waypoint currently being flown to, if any remain.
    pub fn target(&self, path: &WaypointPath) -> Option<Point2> {
        path.waypoints().get(self.next_waypoint_index).copied()
    }

    fn advance_waypoints(&mut self, path: &WaypointPath, config: &SimConfig) {
        let wps = path.waypoints();
        let here = self.pose.position();
        while self.next_waypoint_index < wps.len() {
            let i = self.next_waypoint_index;
            if here.distance(wps[i]) > config.waypoint_radius {
                break;
            }
            if i == wps.len() - 1 {
                let (a, b) = (wps[i - 1], wps[i]);
                let along = (here.x - b.x) * (b.x - a.x) + (here.y - b.y) * (b.y - a.y);
                if along < 0.0 {
                    break;
                }
            }
            self.next_waypoint_index += 1;
        }
    }
}

/// Default start: on the first waypoint, facing the second.
pub fn path_start(path: &WaypointPath, config: &SimConfig) -> Pose {
    let w = path.waypoints();
    let mut pose = Pose::planar(w[0].x, w[0].y, crate::geometry::bearing(w[0], w[1]));
    pose.z = config.altitude;
    pose
}

/// One clean control step.
pub fn step(
    state: &SimState,
    yaw_command: f64,
    config: &SimConfig,
    path: &WaypointPath,
) -> Result<SimState, SimError> {
    step_disturbed(state, yaw_command, Disturbance::ZERO, config, path)
}

/// One control step with an external disturbance.
pub fn step_disturbed(
    state: &SimState,
    yaw_command: f64,
    disturbance: Disturbance,
    config: &SimConfig,
    path: &WaypointPath,
) -> Result<SimState, SimError> {
    if state.status != Status::Running {
        return Err(SimError::NotRunning(state.status));
    }
    if !yaw_command.is_finite() {
        return Err(SimError::NonFiniteCommand);
    }
    let limit = config.max_turn();
    let turn = yaw_command.clamp(-limit, limit);
    let mut next = *state;
    let yaw = wrap_angle(state.pose.yaw() + turn + disturbance.dyaw);
    next.pose.set_yaw(yaw);
    let ds = config.step_length();
    next.pose.x = state.pose.x + disturbance.dx + ds * libm::sin(yaw);
    next.pose.y = state.pose.y + disturbance.dy + ds * libm::cos(yaw);
    next.step_count += 1;
    next.advance_waypoints(path, config);

    next.status = if next.next_waypoint_index == path.len() {
        Status::Completed
    } else if cross_track_distance(path, next.pose.position()) > config.divergence_limit {
        Status::Diverged
    } else if next.step_count >= config.max_steps {
        Status::TimedOut
    } else {
        Status::Running
    };
    Ok(next)
}

/// Relative yaw to the current target waypoint.
pub fn oracle_command(state: &SimState, path: &WaypointPath) -> Result<f64, SimError> {
    if state.status != Status::Running {
        return Err(SimError::NotRunning(state.status));
    }
    let target = state.target(path).ok_or(SimError::NotRunning(state.status))?;
    Ok(relative_yaw(&state.pose, target)?)
}

/// What a controller sees at each step.
pub struct Observation<'a> {
    pub state: &'a SimState,
    pub path: &'a WaypointPath,
    /// Present whenever the controller asks for frames.
    pub frame: Option<&'a Frame>,
}

pub trait Controller {
    /// Whether `command` needs a rendered frame.
    fn needs_frames(&self) -> bool {
        true
    }

    fn command(&mut self, obs: &Observation<'_>) -> Result<f64, String>;
}

/// Steers with the geometric oracle; never looks at frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleController;

impl Controller for OracleController {
    fn needs_frames(&self) -> bool {
        false
    }

    fn command(&mut self, obs: &Observation<'_>) -> Result<f64, String> {
        oracle_command(obs.state, obs.path).map_err(|e| alloc::string::ToString::to_string(&e))
    }
}

/// Emits the same command forever; zero gives the blind baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantController(pub f64);

impl Controller for ConstantController {
    fn needs_frames(&self) -> bool {
        false
    }

    fn command(&mut self, _obs: &Observation<'_>) -> Result<f64, String> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// Seconds since start, `step·dt`.
    pub t: f64,
    pub pose: Pose,
    /// Command issued at this pose; `None` on the terminal row.
    pub command: Option<f64>,
    /// Disturbance applied while stepping away from this pose.
    pub disturbance: Disturbance,
    pub next_waypoint_index: usize,
    pub status: Status,
}

/// Every pose of a closed-loop run; frame `k` is the view from row `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub rows: Vec<TraceRow>,
}

impl RolloutTrace {
    pub fn status(&self) -> Status {
        self.rows.last().map(|r| r.status).unwrap_or(Status::Running)
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.rows.iter().map(|r| r.pose.position()).collect()
    }

    pub fn steps(&self) -> usize {
        self.rows.last().map(|r| r.step).unwrap_or(0)
    }
}

/// Partial trace returned when the controller fails mid-run.
#[derive(Debug, Clone, PartialEq)]
pub struct Aborted {
    pub trace: RolloutTrace,
    pub error: SimError,
}

/// Runs `controller` from `start` until a terminal status.
pub fn rollout<C: Controller + ?Sized>(
    path: &WaypointPath,
    controller: &mut C,
    world: &BlockWorld,
    camera: &CameraSpec,
    config: &SimConfig,
    start: Pose,
) -> Result<RolloutTrace, SimError> {
    rollout_disturbed(path, controller, world, camera, config, start, |_| Disturbance::ZERO)
        .map_err(|a| a.error)
}

/// [`rollout`] with a per-step disturbance source indexed by step number.
pub fn rollout_disturbed<C, D>(
    path: &WaypointPath,
    controller: &mut C,
    world: &BlockWorld,
    camera: &CameraSpec,
    config: &SimConfig,
    start: Pose,
    mut disturbance: D,
) -> Result<RolloutTrace, Aborted>
where
    C: Controller + ?Sized,
    D: FnMut(usize) -> Disturbance,
{
    let fail = |error| Aborted { trace: RolloutTrace { rows: Vec::new() }, error };
    config.validate().map_err(fail)?;
    let w = path.waypoints();
    let offset = point_segment_distance(start.position(), w[0], w[1]);
    if offset > config.divergence_limit {
        return Err(fail(SimError::StartTooFar(offset)));
    }

    let mut state = SimState::start(start, path, config);
    let mut rows = Vec::new();
    while state.status == Status::Running {
        let frame = controller.needs_frames().then(|| render(world, &state.pose, camera));
        let obs = Observation { state: &state, path, frame: frame.as_ref() };
        let command = match controller.command(&obs) {
            Ok(c) => c,
            Err(msg) => {
                return Err(Aborted {
                    trace: RolloutTrace { rows },
                    error: SimError::Controller(msg),
                })
            }
        };
        let d = disturbance(state.step_count);
        rows.push(TraceRow {
            step: state.step_count,
            t: state.step_count as f64 * config.dt,
            pose: state.pose,
            command: Some(command),
            disturbance: d,
            next_waypoint_index: state.next_waypoint_index,
            status: state.status,
        });
        state = step_disturbed(&state, command, d, config, path)
            .map_err(|error| Aborted { trace: RolloutTrace { rows: rows.clone() }, error })?;
    }
    rows.push(TraceRow {
        step: state.step_count,
        t: state.step_count as f64 * config.dt,
        pose: state.pose,
        command: None,
        disturbance: Disturbance::ZERO,
        next_waypoint_index: state.next_waypoint_index,
        status: state.status,
    });
    Ok(RolloutTrace { rows })
}
