//! Run directories named by config hash, guarded by a lock file.

use std::fs::OpenOptions;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Classify, CliError, Result};

pub const LOCK_FILE: &str = ".lock";
pub const CONFIG_FILE: &str = "config.toml";

pub const WORLD: &str = "world.json";
pub const PATH: &str = "path.json";
pub const DATASET: &str = "dataset";
pub const MODELS: &str = "models";
pub const EVAL: &str = "eval";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const PLOT: &str = "plot.svg";

/// An open run directory. The lock is released on drop.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates (if needed) and locks `<root>/run-<hash>`, writing the
    /// canonical config into it.
    pub fn open(root: &Path, config: &RunConfig) -> Result<Self> {
        let path = root.join(config.run_name());
        std::fs::create_dir_all(&path).runtime()?;
        let lock = path.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id()).runtime()?;
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(CliError::runtime(anyhow!(
                    "{} is locked by another command (remove {} if no command is running)",
                    path.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(CliError::runtime(e)),
        }
        let dir = Self { path };
        crate::formats::write_bytes(&dir.file(CONFIG_FILE), config.canonical().as_bytes())?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn checkpoint(&self, slug: &str) -> PathBuf {
        self.path.join(MODELS).join(format!("{slug}.ckpt"))
    }

    pub fn loss_curve(&self, slug: &str) -> PathBuf {
        self.path.join(MODELS).join(format!("{slug}.loss.csv"))
    }

    pub fn eval_dir(&self, slug: &str, random_start: bool) -> PathBuf {
        let mode = if random_start { "random-start" } else { "fixed-start" };
        self.path.join(EVAL).join(format!("{slug}-{mode}"))
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(self.path.join(LOCK_FILE));
    }
}

fn collect(dir: &Path, base: &Path, out: &mut Vec<(String, PathBuf)>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let p = entry.path();
        if entry.file_type()?.is_dir() {
            collect(&p, base, out)?;
        } else if entry.file_name() != LOCK_FILE {
            let rel = p.strip_prefix(base).expect("under base").components();
            let rel: Vec<String> = rel.map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push((rel.join("/"), p));
        }
    }
    Ok(())
}

/// Hex SHA-256 over every file below `dir` (relative path and contents, in
/// path order), ignoring the lock file.
pub fn content_hash(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect(dir, dir, &mut files).runtime()?;
    files.sort();
    let mut h = Sha256::new();
    for (rel, p) in files {
        let bytes = std::fs::read(&p).runtime()?;
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}
