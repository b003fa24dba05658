//! Canonical test paths and random feasible paths.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Point2, WaypointPath};
use crate::rng::{domain, in_range, stream_id, Substream};

/// Shape parameters for [`make_path`]. Every path starts heading along +y
/// and is translated so its bounding box is centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathSpec {
    Straight {
        #[serde(default = "defaults::straight_length")]
        length: f64,
        #[serde(default = "defaults::straight_waypoints")]
        waypoints: usize,
    },
    #[serde(rename = "l")]
    L {
        #[serde(default = "defaults::leg")]
        leg: f64,
        /// Waypoint spacing along each leg; the default places waypoints
        /// only at the ends and the corner.
        #[serde(default = "defaults::l_spacing")]
        spacing: f64,
    },
    Zigzag {
        #[serde(default = "defaults::segment")]
        segment: f64,
        #[serde(default = "defaults::turns")]
        turns: usize,
        /// Magnitude of each turn, alternating right then left.
        #[serde(default = "defaults::turn_angle")]
        turn_angle: f64,
        #[serde(default = "defaults::zigzag_spacing")]
        spacing: f64,
    },
    Loop {
        #[serde(default = "defaults::radius")]
        radius: f64,
        /// Chords around the closed circle.
        #[serde(default = "defaults::loop_waypoints")]
        waypoints: usize,
    },
}

mod defaults {
    pub fn straight_length() -> f64 {
        100.0
    }
    pub fn straight_waypoints() -> usize {
        5
    }
    pub fn leg() -> f64 {
        50.0
    }
    pub fn l_spacing() -> f64 {
        50.0
    }
    pub fn zigzag_spacing() -> f64 {
        25.0
    }
    pub fn segment() -> f64 {
        25.0
    }
    pub fn turns() -> usize {
        5
    }
    pub fn turn_angle() -> f64 {
        1.0
    }
    pub fn radius() -> f64 {
        20.0
    }
    pub fn loop_waypoints() -> usize {
        24
    }
}

impl PathSpec {
    pub fn straight() -> Self {
        PathSpec::Straight { length: defaults::straight_length(), waypoints: defaults::straight_waypoints() }
    }

    pub fn l_shape() -> Self {
        PathSpec::L { leg: defaults::leg(), spacing: defaults::l_spacing() }
    }

    pub fn zigzag() -> Self {
        PathSpec::Zigzag {
            segment: defaults::segment(),
            turns: defaults::turns(),
            turn_angle: defaults::turn_angle(),
            spacing: defaults::zigzag_spacing(),
        }
    }

    pub fn circle() -> Self {
        PathSpec::Loop { radius: defaults::radius(), waypoints: defaults::loop_waypoints() }
    }

    /// Default spec for a kind name: `straight`, `l`, `zigzag` or `loop`.
    pub fn by_name(kind: &str) -> Option<Self> {
        match kind.to_ascii_lowercase().as_str() {
            "straight" => Some(Self::straight()),
            "l" => Some(Self::l_shape()),
            "zigzag" => Some(Self::zigzag()),
            "loop" => Some(Self::circle()),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PathSpec::Straight { .. } => "straight",
            PathSpec::L { .. } => "l",
            PathSpec::Zigzag { .. } => "zigzag",
            PathSpec::Loop { .. } => "loop",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidPath(format!("{name} must be positive, got {v}")))
    }
}

/// Appends points every `spacing` metres (the last one exactly at the end)
/// along a straight leg of `length` from the last point in `pts`.
fn extend(pts: &mut Vec<Point2>, heading: f64, length: f64, spacing: f64) {
    let from = *pts.last().expect("non-empty");
    let n = libm::ceil(length / spacing - 1e-9).max(1.0) as usize;
    let (s, c) = (libm::sin(heading), libm::cos(heading));
    for i in 1..=n {
        let d = length * i as f64 / n as f64;
        pts.push(Point2::new(from.x + d * s, from.y + d * c));
    }
}

fn centred(id: String, mut pts: Vec<Point2>) -> Result<WaypointPath, GeometryError> {
    let (lo, hi) = pts.iter().fold(
        (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y))),
    );
    let cx = 0.5 * (lo.x + hi.x);
    let cy = 0.5 * (lo.y + hi.y);
    for p in &mut pts {
        *p = Point2::new(p.x - cx, p.y - cy);
    }
    WaypointPath::new(id, pts)
}

/// Builds the canonical path described by `spec`.
pub fn make_path(spec: &PathSpec) -> Result<WaypointPath, GeometryError> {
    let mut pts = alloc::vec![Point2::new(0.0, 0.0)];
    match *spec {
        PathSpec::Straight { length, waypoints } => {
            positive("length", length)?;
            if waypoints < 2 {
                return Err(GeometryError::InvalidPath("a straight path needs at least 2 waypoints".into()));
            }
            extend(&mut pts, 0.0, length, length / (waypoints - 1) as f64);
        }
        PathSpec::L { leg, spacing } => {
            positive("leg", leg)?;
            positive("spacing", spacing)?;
            extend(&mut pts, 0.0, leg, spacing);
            extend(&mut pts, PI / 2.0, leg, spacing);
        }
        PathSpec::Zigzag { segment, turns, turn_angle, spacing } => {
            positive("segment", segment)?;
            positive("spacing", spacing)?;
            if !(turn_angle.is_finite() && turn_angle > 0.0 && turn_angle < PI) {
                return Err(GeometryError::InvalidPath(format!("turn_angle must lie in (0, π), got {turn_angle}")));
            }
            let mut heading = 0.0;
            extend(&mut pts, heading, segment, spacing);
            for k in 0..turns {
                heading += if k % 2 == 0 { turn_angle } else { -turn_angle };
                extend(&mut pts, heading, segment, spacing);
            }
        }
        PathSpec::Loop { radius, waypoints } => {
            positive("radius", radius)?;
            if waypoints < 3 {
                return Err(GeometryError::InvalidPath("a loop needs at least 3 chords".into()));
            }
            // Circle through the origin, centred at (radius, 0), flown clockwise.
            pts.clear();
            for i in 0..=waypoints {
                let a = TAU * i as f64 / waypoints as f64;
                pts.push(Point2::new(radius - radius * libm::cos(a), radius * libm::sin(a)));
            }
        }
    }
    centred(String::from(spec.kind()), pts)
}

/// Bounds for [`random_feasible_path`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPathParams {
    pub segments: (usize, usize),
    pub segment_length: (f64, f64),
    /// Largest turn at any interior waypoint, radians.
    pub max_turn: f64,
}

impl Default for RandomPathParams {
    fn default() -> Self {
        Self { segments: (1, 6), segment_length: (5.0, 20.0), max_turn: 2.0 }
    }
}

/// A random polyline path whose turns stay within what the default
/// simulator can fly (turning radius below the waypoint radius).
pub fn random_feasible_path(seed: u64, index: u32, params: &RandomPathParams) -> WaypointPath {
    let stream = Substream::new(seed, stream_id(domain::TEST_PATHS, index, 0));
    let [u0, u1] = stream.uniforms::<2>(0);
    let (lo, hi) = params.segments;
    let segments = lo + ((u0 * (hi - lo + 1) as f64) as usize).min(hi - lo);
    let mut heading = in_range(u1, -PI, PI);
    let mut pts = alloc::vec![Point2::new(0.0, 0.0)];
    for k in 0..segments {
        let [ul, ut] = stream.uniforms::<2>(k as u64 + 1);
        if k > 0 {
            heading += in_range(ut, -params.max_turn, params.max_turn);
        }
        let len = in_range(ul, params.segment_length.0, params.segment_length.1);
        let p = *pts.last().expect("non-empty");
        pts.push(Point2::new(p.x + len * libm::sin(heading), p.y + len * libm::cos(heading)));
    }
    centred(format!("random-{index}"), pts).expect("segment lengths are positive")
}
