//! Overhead SVG plot of a path and the trajectories flown along it.
//!
//! Output depends only on the inputs: coordinates are printed with fixed
//! precision and elements are emitted in input order.

use std::fmt::Write as _;

use thiserror::Error;
use wpnav_core::{Point2, RolloutTrace, WaypointPath};

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("at least one trace is required")]
    EmptyTraces,
}

const SIZE: f64 = 720.0;
const PAD_LEFT: f64 = 70.0;
const PAD_RIGHT: f64 = 160.0;
const PAD_Y: f64 = 50.0;
const WAYPOINT_COLOR: &str = "#d62728";
const TRAJECTORY_COLOR: &str = "#1f77b4";

/// A step from the 1-2-5 sequence giving roughly `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') { "0".into() } else { s }
}

/// Renders the plot. Waypoints are red circles, every recorded trajectory
/// position is a blue circle.
pub fn path_plot(path: &WaypointPath, traces: &[RolloutTrace]) -> Result<String, PlotError> {
    if traces.is_empty() {
        return Err(PlotError::EmptyTraces);
    }
    let points: Vec<Vec<Point2>> = traces.iter().map(|t| t.positions()).collect();
    let all = path.waypoints().iter().chain(points.iter().flatten());
    let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in all {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    // Square data window with a 5% margin on the larger side.
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1.0) * 1.1;
    let cx = 0.5 * (lo.x + hi.x);
    let cy = 0.5 * (lo.y + hi.y);
    let (x0, y0) = (cx - span / 2.0, cy - span / 2.0);
    let sx = |x: f64| PAD_LEFT + (x - x0) / span * SIZE;
    let sy = |y: f64| PAD_Y + SIZE - (y - y0) / span * SIZE;

    let width = PAD_LEFT + SIZE + PAD_RIGHT;
    let height = 2.0 * PAD_Y + SIZE;
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(w, r#"<rect class="plot-area" x="{PAD_LEFT:.1}" y="{PAD_Y:.1}" width="{SIZE:.1}" height="{SIZE:.1}" fill="none" stroke="black"/>"#).unwrap();

    let step = tick_step(span, 8.0);
    let mut v = (x0 / step).ceil() * step;
    while v <= x0 + span + 1e-9 {
        let x = sx(v);
        let label = fmt_tick(v, step);
        writeln!(w, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, PAD_Y + SIZE, PAD_Y + SIZE + 5.0, PAD_Y + SIZE + 19.0).unwrap();
        v += step;
    }
    let mut v = (y0 / step).ceil() * step;
    while v <= y0 + span + 1e-9 {
        let y = sy(v);
        let label = fmt_tick(v, step);
        writeln!(w, r#"<line x1="{:.2}" y1="{y:.2}" x2="{PAD_LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, PAD_LEFT - 5.0, PAD_LEFT - 8.0, y + 4.0).unwrap();
        v += step;
    }
    writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x (m)</text>"#, PAD_LEFT + SIZE / 2.0, height - 10.0).unwrap();
    writeln!(w, r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">y (m)</text>"#, PAD_Y + SIZE / 2.0, PAD_Y + SIZE / 2.0).unwrap();

    writeln!(w, r#"<g class="trajectory" fill="{TRAJECTORY_COLOR}">"#).unwrap();
    for p in points.iter().flatten() {
        writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, sx(p.x), sy(p.y)).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, r#"<g class="waypoints" fill="{WAYPOINT_COLOR}">"#).unwrap();
    for p in path.waypoints() {
        writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="4"/>"#, sx(p.x), sy(p.y)).unwrap();
    }
    writeln!(w, "</g>").unwrap();

    let lx = PAD_LEFT + SIZE + 20.0;
    writeln!(w, r#"<g class="legend">"#).unwrap();
    writeln!(w, r#"<circle cx="{lx:.1}" cy="{:.1}" r="4" fill="{WAYPOINT_COLOR}"/><text x="{:.1}" y="{:.1}">waypoints</text>"#, PAD_Y + 10.0, lx + 10.0, PAD_Y + 14.0).unwrap();
    writeln!(w, r#"<circle cx="{lx:.1}" cy="{:.1}" r="1.5" fill="{TRAJECTORY_COLOR}"/><text x="{:.1}" y="{:.1}">trajectory</text>"#, PAD_Y + 30.0, lx + 10.0, PAD_Y + 34.0).unwrap();
    writeln!(w, "</g>").unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(s)
}
