//! Rollout traces as CSV, one row per recorded pose.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use wpnav_core::sim::{Disturbance, TraceRow};
use wpnav_core::{Pose, RolloutTrace};

use super::{read_bytes, write_bytes};
use crate::error::{Classify, Result};

pub const HEADER: &str = "step,t,x,y,z,yaw,command,dx,dy,dyaw,next_wp,status";

/// Serialises a trace. The terminal row has an empty `command`.
pub fn to_csv(trace: &RolloutTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &trace.rows {
        let command = r.command.map(|c| c.to_string()).unwrap_or_default();
        let d = r.disturbance;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t,
            r.pose.x,
            r.pose.y,
            r.pose.z,
            r.pose.yaw(),
            command,
            d.dx,
            d.dy,
            d.dyaw,
            r.next_waypoint_index,
            r.status.as_str()
        )
        .expect("writing to a String");
    }
    out
}

pub fn from_csv(text: &str) -> anyhow::Result<RolloutTrace> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        bail!("trace header must be `{HEADER}`");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = parse_row(line).with_context(|| format!("trace row {}", i + 1))?;
        rows.push(row);
    }
    Ok(RolloutTrace { rows })
}

fn parse_row(line: &str) -> anyhow::Result<TraceRow> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 12 {
        bail!("expected 12 fields, found {}", f.len());
    }
    let num = |i: usize| f[i].parse::<f64>().with_context(|| format!("field {i} `{}`", f[i]));
    let pose = Pose::new(num(2)?, num(3)?, num(4)?, num(5)?).map_err(|e| anyhow!(e))?;
    Ok(TraceRow {
        step: f[0].parse()?,
        t: num(1)?,
        pose,
        command: if f[6].is_empty() { None } else { Some(num(6)?) },
        disturbance: Disturbance { dx: num(7)?, dy: num(8)?, dyaw: num(9)? },
        next_waypoint_index: f[10].parse()?,
        status: f[11].parse().map_err(|_| anyhow!("unknown status `{}`", f[11]))?,
    })
}

pub fn write_trace(path: &Path, trace: &RolloutTrace) -> Result<()> {
    write_bytes(path, to_csv(trace).as_bytes())
}

pub fn read_trace(path: &Path) -> Result<RolloutTrace> {
    let bytes = read_bytes(path, "trace file")?;
    let text = String::from_utf8(bytes).validation()?;
    from_csv(&text).with_context(|| format!("parsing {}", path.display())).validation()
}
