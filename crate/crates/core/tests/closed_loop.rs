//! Kinematic invariants of closed-loop rollouts and the oracle tracking bound.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpnav_core::geometry::mean_waypoint_min_distance;
use wpnav_core::paths::{random_feasible_path, RandomPathParams};
use wpnav_core::sim::{path_start, ConstantController, Controller, Observation, OracleController};
use wpnav_core::{
    generate_world, make_path, rollout, BlockWorld, CameraSpec, PathSpec, Point2, RolloutTrace,
    SimConfig, Status, WaypointPath, WorldParams,
};

fn world() -> BlockWorld {
    generate_world(9, &WorldParams { block_count: 20, ..Default::default() }).unwrap()
}

fn camera() -> CameraSpec {
    CameraSpec { width: 16, height: 9, ..CameraSpec::default() }
}

fn fly<C: Controller>(path: &WaypointPath, c: &mut C, cfg: &SimConfig) -> RolloutTrace {
    rollout(path, c, &world(), &camera(), cfg, path_start(path, cfg)).unwrap()
}

/// Uniformly random commands over twice the turn limit.
struct Jitter(ChaCha8Rng);

impl Controller for Jitter {
    fn needs_frames(&self) -> bool {
        false
    }

    fn command(&mut self, _obs: &Observation<'_>) -> Result<f64, String> {
        Ok(self.0.gen_range(-0.5..0.5))
    }
}

fn check_kinematics(trace: &RolloutTrace, cfg: &SimConfig) {
    let z = trace.rows[0].pose.z;
    for pair in trace.rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert_eq!(b.pose.z.to_bits(), z.to_bits());
        let moved = a.pose.position().distance(b.pose.position());
        assert!((moved - cfg.speed * cfg.dt).abs() <= 1e-12, "moved {moved}");
        let turn = wpnav_core::geometry::wrap_angle(b.pose.yaw() - a.pose.yaw());
        assert!(turn.abs() <= cfg.max_yaw_rate * cfg.dt + 1e-12);
        assert!(b.next_waypoint_index >= a.next_waypoint_index);
        assert!((b.t - b.step as f64 * cfg.dt).abs() == 0.0);
    }
}

#[test]
fn oracle_completes_random_paths_within_bound() {
    let cfg = SimConfig::default();
    let bound = cfg.speed * cfg.dt + cfg.waypoint_radius;
    let params = RandomPathParams::default();
    for i in 0..100 {
        let path = random_feasible_path(2024, i, &params);
        let trace = fly(&path, &mut OracleController, &cfg);
        assert_eq!(trace.status(), Status::Completed, "path {i}");
        let mwmd = mean_waypoint_min_distance(&path, &trace.positions()).unwrap();
        assert!(mwmd <= bound, "path {i}: MWMD {mwmd} > {bound}");
        check_kinematics(&trace, &cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_commands_respect_kinematics(seed in any::<u64>(), index in 0u32..1000) {
        let cfg = SimConfig { max_steps: 300, ..SimConfig::default() };
        let path = random_feasible_path(seed, index, &RandomPathParams::default());
        let trace = fly(&path, &mut Jitter(ChaCha8Rng::seed_from_u64(seed)), &cfg);
        check_kinematics(&trace, &cfg);
        prop_assert!(trace.status() != Status::Running);
    }
}

#[test]
fn straight_flight_takes_the_kinematic_step_count() {
    let cfg = SimConfig { dt: 1.0, ..SimConfig::default() };
    let path = WaypointPath::new("s", vec![Point2::new(0.0, 0.0), Point2::new(0.0, 37.0)]).unwrap();
    let trace = fly(&path, &mut OracleController, &cfg);
    assert_eq!(trace.status(), Status::Completed);
    let expected = (37.0 / (cfg.speed * cfg.dt)).ceil() as i64;
    assert!((trace.steps() as i64 - expected).abs() <= 1, "{} steps", trace.steps());
}

#[test]
fn blind_flight_fails_a_turning_path() {
    let cfg = SimConfig::default();
    for spec in [PathSpec::l_shape(), PathSpec::zigzag()] {
        let path = make_path(&spec).unwrap();
        let trace = fly(&path, &mut ConstantController(0.0), &cfg);
        assert!(matches!(trace.status(), Status::Diverged | Status::TimedOut), "{}", path.id());
    }
}

#[test]
fn zero_step_budget_times_out_at_once() {
    let cfg = SimConfig { max_steps: 0, ..SimConfig::default() };
    let path = make_path(&PathSpec::straight()).unwrap();
    let trace = fly(&path, &mut OracleController, &cfg);
    assert_eq!(trace.status(), Status::TimedOut);
    assert_eq!(trace.rows.len(), 1);
}

#[test]
fn rollouts_are_repeatable() {
    let cfg = SimConfig::default();
    let path = make_path(&PathSpec::zigzag()).unwrap();
    let a = fly(&path, &mut Jitter(ChaCha8Rng::seed_from_u64(1)), &cfg);
    let b = fly(&path, &mut Jitter(ChaCha8Rng::seed_from_u64(1)), &cfg);
    assert_eq!(a, b);
}
