//! Synthetic block world and a pinhole raycasting camera.
//!
//! The world is a flat ground plane at `z = 0` populated with axis-aligned
//! boxes resting on it. The camera is level, mounted at the drone position
//! and looking along the pose heading. Each pixel takes the shade of the
//! first surface its center ray hits: a block, the ground, or the sky.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::rng::{domain, in_range, stream_id, Substream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid world parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldParams {
    pub block_count: usize,
    /// Half-width of the square placement area centred on the origin.
    pub area_extent: f64,
    /// Horizontal block edge length range `[min, max)`.
    pub size_range: [f64; 2],
    /// Block height range `[min, max)`.
    pub height_range: [f64; 2],
    pub shade_range: [f32; 2],
    pub ground_shade: f32,
    pub sky_shade: f32,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            block_count: 400,
            area_extent: 100.0,
            size_range: [2.0, 8.0],
            height_range: [2.0, 14.0],
            shade_range: [0.0, 0.8],
            ground_shade: 0.45,
            sky_shade: 0.95,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite();
        if !(self.area_extent > 0.0 && self.area_extent.is_finite()) {
            return Err(WorldError::InvalidParams("area_extent must be positive"));
        }
        if !range_ok(self.size_range) {
            return Err(WorldError::InvalidParams("size_range must be positive and ordered"));
        }
        if !range_ok(self.height_range) {
            return Err(WorldError::InvalidParams("height_range must be positive and ordered"));
        }
        let unit = |s: f32| (0.0..=1.0).contains(&s);
        if !(unit(self.shade_range[0]) && unit(self.shade_range[1]))
            || self.shade_range[1] < self.shade_range[0]
        {
            return Err(WorldError::InvalidParams("shade_range must lie in [0, 1]"));
        }
        if !unit(self.ground_shade) || !unit(self.sky_shade) {
            return Err(WorldError::InvalidParams("ground and sky shades must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// An axis-aligned box standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub shade: f32,
}

impl Block {
    fn min(&self) -> [f64; 3] {
        core::array::from_fn(|k| self.center[k] - 0.5 * self.size[k])
    }

    fn max(&self) -> [f64; 3] {
        core::array::from_fn(|k| self.center[k] + 0.5 * self.size[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockWorld {
    pub seed: u64,
    pub params: WorldParams,
    pub blocks: Vec<Block>,
}

impl BlockWorld {
    pub fn ground_shade(&self) -> f32 {
        self.params.ground_shade
    }

    pub fn sky_shade(&self) -> f32 {
        self.params.sky_shade
    }

    /// Whether a planar point lies inside the placement area.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let e = self.params.area_extent;
        x.abs() <= e && y.abs() <= e
    }

    /// Checks the structural invariants of a world loaded from elsewhere.
    pub fn validate(&self) -> Result<(), WorldError> {
        self.params.validate()?;
        for b in &self.blocks {
            if b.size.iter().any(|s| !(*s > 0.0) || !s.is_finite())
                || b.center.iter().any(|c| !c.is_finite())
            {
                return Err(WorldError::InvalidParams("block sizes must be positive"));
            }
            if !(0.0..=1.0).contains(&b.shade) {
                return Err(WorldError::InvalidParams("block shade outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Generates a world from a seed. Blocks are drawn in order from one ChaCha8
/// stream, six uniforms per block: center x, center y, width, depth, height,
/// shade. Blocks may be taller than the flight altitude; collisions are not
/// modelled, and a camera inside a block sees through it.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<BlockWorld, WorldError> {
    params.validate()?;
    let mut rng = Substream::new(seed, stream_id(domain::WORLD, 0, 0)).sequential();
    let e = params.area_extent;
    let blocks = (0..params.block_count)
        .map(|_| {
            let u: [f64; 6] = core::array::from_fn(|_| rng.gen::<f64>());
            let height = in_range(u[4], params.height_range[0], params.height_range[1]);
            let shade = in_range(u[5], params.shade_range[0] as f64, params.shade_range[1] as f64);
            Block {
                center: [in_range(u[0], -e, e), in_range(u[1], -e, e), 0.5 * height],
                size: [
                    in_range(u[2], params.size_range[0], params.size_range[1]),
                    in_range(u[3], params.size_range[0], params.size_range[1]),
                    height,
                ],
                shade: (shade as f32).clamp(0.0, 1.0),
            }
        })
        .collect();
    Ok(BlockWorld { seed, params: params.clone(), blocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub horizontal_fov: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self { width: 64, height: 36, horizontal_fov: core::f64::consts::FRAC_PI_2 }
    }
}

impl CameraSpec {
    /// Full capture resolution.
    pub fn full_resolution() -> Self {
        Self { width: 512, height: 288, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.width < 8 || self.height < 8 {
            return Err(WorldError::InvalidCamera("width and height must be at least 8"));
        }
        if self.width * 9 != self.height * 16 {
            return Err(WorldError::InvalidCamera("aspect ratio must be 16:9"));
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < core::f64::consts::PI) {
            return Err(WorldError::InvalidCamera("horizontal_fov must be in (0, π)"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Image-plane x coordinate (at unit depth) of a column's center.
    pub fn column_slope(&self, col: usize) -> f64 {
        let tan_h = libm::tan(0.5 * self.horizontal_fov);
        ((col as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * tan_h
    }

    /// Image-plane z coordinate (at unit depth) of a row's center; positive is up.
    pub fn row_slope(&self, row: usize) -> f64 {
        let tan_v = libm::tan(0.5 * self.horizontal_fov) * self.height as f64 / self.width as f64;
        (1.0 - (row as f64 + 0.5) / self.height as f64 * 2.0) * tan_v
    }
}

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl Frame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec_zeros(width * height) }
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.pixels[row * self.width + col]
    }
}

fn vec_zeros(n: usize) -> Vec<f32> {
    alloc::vec![0.0; n]
}

/// Parametric interval `[t0, t1]` where the ray `o + t·d` lies within
/// `[lo, hi]` along one axis; `None` when parallel and outside.
#[inline]
pub(crate) fn slab(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        if o >= lo && o <= hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let a = (lo - o) / d;
        let b = (hi - o) / d;
        Some(if a <= b { (a, b) } else { (b, a) })
    }
}

/// Ray direction at unit forward depth: `forward + u·right + v·up`.
#[inline]
pub(crate) fn ray_direction(yaw: f64, u: f64, v: f64) -> [f64; 3] {
    let (s, c) = (libm::sin(yaw), libm::cos(yaw));
    // forward = (sin, cos, 0); right = (cos, -sin, 0)
    [s + u * c, c - u * s, v]
}

/// Renders the forward view from `pose`.
///
/// Rays go through pixel centers. The horizontal part of every ray in a
/// column is shared, so block footprints are clipped once per column and
/// only the vertical slab is evaluated per pixel.
pub fn render(world: &BlockWorld, pose: &Pose, camera: &CameraSpec) -> Frame {
    let (w, h) = (camera.width, camera.height);
    let mut pixels = vec_zeros(w * h);
    let (ox, oy, oz) = (pose.x, pose.y, pose.z);
    let row_v: Vec<f64> = (0..h).map(|r| camera.row_slope(r)).collect();
    let mut hits: Vec<(f64, f64, f64, f32)> = Vec::new();

    for col in 0..w {
        let d = ray_direction(pose.yaw(), camera.column_slope(col), 0.0);
        hits.clear();
        for b in &world.blocks {
            let (lo, hi) = (b.min(), b.max());
            let Some((ax0, ax1)) = slab(ox, d[0], lo[0], hi[0]) else { continue };
            let Some((ay0, ay1)) = slab(oy, d[1], lo[1], hi[1]) else { continue };
            let (t0, t1) = (ax0.max(ay0), ax1.min(ay1));
            if t0 <= t1 && t1 > 0.0 {
                hits.push((t0, t1, hi[2], b.shade));
            }
        }
        for (row, &v) in row_v.iter().enumerate() {
            let (mut best, mut shade) = if v < 0.0 {
                (-oz / v, world.ground_shade())
            } else {
                (f64::INFINITY, world.sky_shade())
            };
            for &(t0, t1, top, block_shade) in &hits {
                let Some((z0, z1)) = slab(oz, v, 0.0, top) else { continue };
                let (near, far) = (t0.max(z0), t1.min(z1));
                if near <= far && near > 0.0 && near < best {
                    best = near;
                    shade = block_shade;
                }
            }
            pixels[row * w + col] = shade;
        }
    }
    Frame { width: w, height: h, pixels }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Per-pixel full 3-D slab test, no hoisting.
    fn render_brute(world: &BlockWorld, pose: &Pose, camera: &CameraSpec) -> Vec<f32> {
        let mut out = Vec::new();
        for row in 0..camera.height {
            for col in 0..camera.width {
                let d = ray_direction(pose.yaw(), camera.column_slope(col), camera.row_slope(row));
                let o = [pose.x, pose.y, pose.z];
                let (mut best, mut shade) = if d[2] < 0.0 {
                    (-o[2] / d[2], world.ground_shade())
                } else {
                    (f64::INFINITY, world.sky_shade())
                };
                for b in &world.blocks {
                    let (lo, hi) = (b.min(), b.max());
                    let mut near = f64::NEG_INFINITY;
                    let mut far = f64::INFINITY;
                    let mut miss = false;
                    for k in 0..3 {
                        let lo_k = if k == 2 { 0.0 } else { lo[k] };
                        match slab(o[k], d[k], lo_k, hi[k]) {
                            Some((a, b)) => {
                                near = near.max(a);
                                far = far.min(b);
                            }
                            None => miss = true,
                        }
                    }
                    if !miss && near <= far && near > 0.0 && near < best {
                        best = near;
                        shade = b.shade;
                    }
                }
                out.push(shade);
            }
        }
        out
    }

    #[test]
    fn empty_world_when_no_blocks() {
        let params = WorldParams { block_count: 0, ..WorldParams::default() };
        assert!(generate_world(7, &params).unwrap().blocks.is_empty());
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let params = WorldParams { block_count: 50, ..WorldParams::default() };
        let a = generate_world(7, &params).unwrap();
        let b = generate_world(7, &params).unwrap();
        assert_eq!(a, b);
        let e = params.area_extent;
        for blk in &a.blocks {
            assert!(blk.center[0].abs() <= e && blk.center[1].abs() <= e);
            assert!(blk.size.iter().all(|s| *s > 0.0));
            assert_eq!(blk.center[2], 0.5 * blk.size[2]);
        }
        assert_ne!(a, generate_world(8, &params).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = WorldParams { area_extent: 0.0, ..WorldParams::default() };
        assert!(generate_world(1, &bad).is_err());
        let bad = WorldParams { size_range: [-1.0, 2.0], ..WorldParams::default() };
        assert!(generate_world(1, &bad).is_err());
    }

    #[test]
    fn camera_validation() {
        assert!(CameraSpec::default().validate().is_ok());
        assert!(CameraSpec::full_resolution().validate().is_ok());
        assert!(CameraSpec { width: 64, height: 40, ..CameraSpec::default() }.validate().is_err());
        assert!(CameraSpec { width: 0, height: 0, ..CameraSpec::default() }.validate().is_err());
    }

    #[test]
    fn empty_world_horizon() {
        let world = generate_world(1, &WorldParams { block_count: 0, ..Default::default() }).unwrap();
        let cam = CameraSpec::default();
        let frame = render(&world, &Pose::planar(3.0, -2.0, 0.7), &cam);
        // a level camera puts the horizon through the image center
        let horizon = cam.height / 2;
        for row in 0..cam.height {
            let expect = if row < horizon { world.sky_shade() } else { world.ground_shade() };
            for col in 0..cam.width {
                assert_eq!(frame.get(col, row), expect, "row {row}");
            }
        }
    }

    #[test]
    fn block_dead_ahead_projects_to_front_face() {
        // 4 m wide, 3 m deep, 9 m tall box whose front face is 8 m ahead
        let world = BlockWorld {
            seed: 0,
            params: WorldParams::default(),
            blocks: vec![Block { center: [0.0, 9.5, 4.5], size: [4.0, 3.0, 9.0], shade: 0.1 }],
        };
        let cam = CameraSpec::default();
        let pose = Pose::planar(0.0, 0.0, 0.0);
        let frame = render(&world, &pose, &cam);
        let (face_dist, half_w, z_cam) = (8.0, 2.0, 5.0);
        for row in 0..cam.height {
            for col in 0..cam.width {
                let (u, v) = (cam.column_slope(col), cam.row_slope(row));
                let inside = u.abs() <= half_w / face_dist
                    && v >= -z_cam / face_dist
                    && v <= (9.0 - z_cam) / face_dist;
                assert_eq!(frame.get(col, row) == 0.1, inside, "pixel ({col}, {row})");
            }
        }
        // the region is horizontally centred
        let hit_cols: Vec<usize> =
            (0..cam.width).filter(|&c| frame.get(c, cam.height / 2) == 0.1).collect();
        assert_eq!(hit_cols.first().unwrap() + hit_cols.last().unwrap(), cam.width - 1);
    }

    #[test]
    fn hoisted_render_matches_brute_force() {
        let world = generate_world(3, &WorldParams { block_count: 120, ..Default::default() })
            .unwrap();
        let cam = CameraSpec::default();
        for (i, pose) in [
            Pose::planar(0.0, 0.0, 0.0),
            Pose::planar(10.0, -20.0, 2.1),
            Pose::planar(-35.5, 12.25, -1.3),
            Pose::new(5.0, 5.0, 20.0, 3.0).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            assert_eq!(render(&world, pose, &cam).pixels, render_brute(&world, pose, &cam), "pose {i}");
        }
    }

    #[test]
    fn camera_inside_block_sees_past_it() {
        let world = BlockWorld {
            seed: 0,
            params: WorldParams::default(),
            blocks: vec![Block { center: [0.0, 0.0, 5.0], size: [2.0, 2.0, 10.0], shade: 0.2 }],
        };
        let frame = render(&world, &Pose::planar(0.0, 0.0, 0.0), &CameraSpec::default());
        assert!(frame.pixels.iter().all(|&p| p != 0.2));
    }

    #[test]
    fn render_is_deterministic_and_bounded() {
        let world = generate_world(11, &WorldParams::default()).unwrap();
        let cam = CameraSpec::default();
        let pose = Pose::planar(1.5, 2.5, 0.3);
        let a = render(&world, &pose, &cam);
        assert_eq!(a, render(&world, &pose, &cam));
        assert!(a.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
