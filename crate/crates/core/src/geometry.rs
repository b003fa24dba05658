//! Planar geometry: poses, waypoint paths, yaw labels and tracking metrics.
//!
//! Angles follow a single fixed convention: a bearing is measured from the
//! +y axis, clockwise-positive, so `bearing((0,0), (1,0)) == π/2`. Every
//! angle handed out by this module is wrapped into `(-π, π]`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum separation for two points to count as distinct.
pub const DISTINCT_EPS: f64 = 1e-9;

/// Default flight altitude in meters.
pub const DEFAULT_ALTITUDE: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("target coincides with the pose position")]
    DegenerateTarget,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid pose: {0}")]
    InvalidPose(&'static str),
}

/// Wraps an angle into `(-π, π]`; `-π` maps to `π`.
pub fn wrap_angle(theta: f64) -> f64 {
    // IEEE remainder is exact and lands in [-π, π].
    let r = libm::remainder(theta, TAU);
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        libm::hypot(other.x - self.x, other.y - self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Point2::new(p[0], p[1])
    }
}

/// Bearing of `to` as seen from `from`: `atan2(Δx, Δy)`, wrapped.
pub fn bearing(from: Point2, to: Point2) -> f64 {
    wrap_angle(libm::atan2(to.x - from.x, to.y - from.y))
}

/// Drone pose: east/north position, altitude, and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    yaw: f64,
}

impl Pose {
    /// Builds a pose, wrapping `yaw`. Altitude must be positive and finite.
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Result<Self, GeometryError> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(GeometryError::InvalidPose("altitude must be positive"));
        }
        if !x.is_finite() || !y.is_finite() || !yaw.is_finite() {
            return Err(GeometryError::InvalidPose("non-finite component"));
        }
        Ok(Self { x, y, z, yaw: wrap_angle(yaw) })
    }

    /// Pose at the default altitude.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, z: DEFAULT_ALTITUDE, yaw: wrap_angle(yaw) }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn set_yaw(&mut self, yaw: f64) {
        self.yaw = wrap_angle(yaw);
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Angle the drone must rotate by to face `target`; the training label and
/// oracle command.
pub fn relative_yaw(pose: &Pose, target: Point2) -> Result<f64, GeometryError> {
    let here = pose.position();
    if here.distance(target) <= DISTINCT_EPS {
        return Err(GeometryError::DegenerateTarget);
    }
    Ok(wrap_angle(bearing(here, target) - pose.yaw))
}

/// An ordered list of at least two waypoints with distinct neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct WaypointPath {
    id: String,
    waypoints: Vec<Point2>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    id: String,
    waypoints: Vec<[f64; 2]>,
}

impl TryFrom<RawPath> for WaypointPath {
    type Error = GeometryError;

    fn try_from(raw: RawPath) -> Result<Self, Self::Error> {
        WaypointPath::new(raw.id, raw.waypoints.into_iter().map(Point2::from).collect())
    }
}

impl From<WaypointPath> for RawPath {
    fn from(p: WaypointPath) -> Self {
        RawPath { id: p.id, waypoints: p.waypoints.iter().map(|w| [w.x, w.y]).collect() }
    }
}

impl WaypointPath {
    pub fn new(id: impl Into<String>, waypoints: Vec<Point2>) -> Result<Self, GeometryError> {
        if waypoints.len() < 2 {
            return Err(GeometryError::InvalidPath(format!(
                "need at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        if let Some(i) = waypoints.iter().position(|w| !w.is_finite()) {
            return Err(GeometryError::InvalidPath(format!("waypoint {i} is not finite")));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0].distance(w[1]) <= DISTINCT_EPS) {
            return Err(GeometryError::InvalidPath(format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Self { id: id.into(), waypoints })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bearing of each segment, in path order.
    pub fn segment_bearings(&self) -> impl Iterator<Item = f64> + '_ {
        self.waypoints.windows(2).map(|w| bearing(w[0], w[1]))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = self.waypoints[0];
        let mut hi = lo;
        for w in &self.waypoints[1..] {
            lo.x = lo.x.min(w.x);
            lo.y = lo.y.min(w.y);
            hi.x = hi.x.max(w.x);
            hi.y = hi.y.max(w.y);
        }
        (lo, hi)
    }
}

/// Sum of consecutive segment lengths.
pub fn path_distance(path: &WaypointPath) -> f64 {
    path.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Accumulated absolute heading change between successive segments.
pub fn sum_angle_change(path: &WaypointPath) -> f64 {
    let bearings: Vec<f64> = path.segment_bearings().collect();
    bearings.windows(2).map(|b| wrap_angle(b[1] - b[0]).abs()).sum()
}

/// For each waypoint, the closest approach of the trajectory; averaged.
pub fn mean_waypoint_min_distance(
    path: &WaypointPath,
    trajectory: &[Point2],
) -> Result<f64, GeometryError> {
    if trajectory.is_empty() {
        return Err(GeometryError::EmptyTrajectory);
    }
    let total: f64 = path
        .waypoints
        .iter()
        .map(|w| trajectory.iter().map(|p| w.distance(*p)).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(total / path.len() as f64)
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (abx, aby) = (b.x - a.x, b.y - a.y);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(Point2::new(a.x + t * abx, a.y + t * aby))
}

/// Indices of the two waypoints nearest to `p`, ties going to the lower index.
/// Returned in ascending index order.
pub fn two_nearest_waypoints(path: &WaypointPath, p: Point2) -> (usize, usize) {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (i, w) in path.waypoints.iter().enumerate() {
        let d = p.distance(*w);
        // strict comparisons keep the earlier index on ties
        if d < best.1 {
            second = best;
            best = (i, d);
        } else if d < second.1 {
            second = (i, d);
        }
    }
    (best.0.min(second.0), best.0.max(second.0))
}

/// Distance from `position` to the segment joining its two nearest waypoints.
pub fn cross_track_distance(path: &WaypointPath, position: Point2) -> f64 {
    let (i, j) = two_nearest_waypoints(path, position);
    point_segment_distance(position, path.waypoints[i], path.waypoints[j])
}

/// Cross-track distance averaged over every trajectory point.
pub fn mean_cross_track_distance(
    path: &WaypointPath,
    trajectory: &[Point2],
) -> Result<f64, GeometryError> {
    if trajectory.is_empty() {
        return Err(GeometryError::EmptyTrajectory);
    }
    let total: f64 = trajectory.iter().map(|p| cross_track_distance(path, *p)).sum();
    Ok(total / trajectory.len() as f64)
}
