//! On-disk formats for every artifact.

pub mod checkpoint;
pub mod dataset;
pub mod report;
pub mod trace;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use wpnav_core::{BlockWorld, WaypointPath};

use crate::error::{Classify, CliError, Result};

/// Reads a whole file, mapping a missing file to a validation error that
/// names it.
pub fn read_bytes(path: &Path, what: &str) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::missing(what, path)
        } else {
            CliError::runtime(anyhow::Error::new(e).context(format!("reading {}", path.display())))
        }
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).runtime()?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::runtime(anyhow::Error::new(e).context(format!("writing {}", path.display()))))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let bytes = read_bytes(path, what)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::validation(anyhow::Error::new(e).context(format!("parsing {}", path.display()))))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).runtime()?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_path(path: &Path) -> Result<WaypointPath> {
    read_json(path, "path file")
}

pub fn write_path(path: &Path, waypoints: &WaypointPath) -> Result<()> {
    write_json(path, waypoints)
}

pub fn read_world(path: &Path) -> Result<BlockWorld> {
    let world: BlockWorld = read_json(path, "world file")?;
    world.validate().validation()?;
    Ok(world)
}

pub fn write_world(path: &Path, world: &BlockWorld) -> Result<()> {
    write_json(path, world)
}
