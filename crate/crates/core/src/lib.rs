//! Deterministic core for visual waypoint path following.
//!
//! Everything in this crate is a pure function of its inputs and seeds:
//! path geometry and tracking metrics, a block-world raycaster, a kinematic
//! yaw-steered drone, navigation-envelope data generation, frozen-extractor
//! regression models trained with Adam, and the closed-loop evaluation
//! protocol. Transcendental math goes through `libm` so results do not
//! depend on the platform's C library.
//!
//! IO, file formats and the command line live in the `wpnav` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod envelope;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod paths;
pub mod rng;
pub mod sim;
pub mod world;

pub use envelope::{build_dataset, perturb_rollout, sequence_windows, Dataset, EnvelopeConfig};
pub use eval::{compare_regressors, evaluate, EvalConfig, MetricsReport};
pub use paths::{make_path, PathSpec};
pub use geometry::{Point2, Pose, WaypointPath};
pub use model::{Model, RegressorKind, TrainConfig};
pub use sim::{rollout, RolloutTrace, SimConfig, SimState, Status};
pub use world::{generate_world, render, BlockWorld, CameraSpec, Frame, WorldParams};
