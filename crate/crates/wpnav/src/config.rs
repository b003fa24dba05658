//! Run configuration: one TOML document with a section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wpnav_core::eval::EvalConfig;
use wpnav_core::model::{ModelSpec, RegressorKind, TrainConfig};
use wpnav_core::paths::PathSpec;
use wpnav_core::{CameraSpec, EnvelopeConfig, SimConfig, WorldParams};

use crate::error::{Classify, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub variants: Vec<RegressorKind>,
    /// Append rows for the constant-zero controller.
    pub baseline: bool,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { variants: RegressorKind::standard().to_vec(), baseline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces every per-module seed. Resolved away before the
    /// config is canonicalised.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub world_seed: u64,
    pub world: WorldParams,
    pub camera: CameraSpec,
    pub sim: SimConfig,
    pub path: PathSpec,
    pub envelope: EnvelopeConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub compare: CompareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            world_seed: 0,
            world: WorldParams::default(),
            camera: CameraSpec::default(),
            sim: SimConfig::default(),
            path: PathSpec::zigzag(),
            envelope: EnvelopeConfig::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            compare: CompareSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).validation()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::missing("config file", path)
            } else {
                CliError::runtime(anyhow::Error::new(e).context(format!("reading {}", path.display())))
            }
        })?;
        Self::parse(&text).map_err(|e| CliError::validation(e.error.context(format!("in {}", path.display()))))
    }

    /// Sets every module seed from `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        self.world_seed = seed;
        self.envelope.seed = seed;
        self.model.extractor.seed = seed;
        self.train.init_seed = seed;
        self.train.shuffle_seed = seed;
        self.eval.eval_seed = seed;
    }

    /// Folds the master seed (`override_seed` first, then the file's) into
    /// the module seeds and checks every section.
    pub fn resolve(mut self, override_seed: Option<u64>) -> Result<Self> {
        if let Some(seed) = override_seed.or(self.seed.take()) {
            self.apply_seed(seed);
        }
        self.seed = None;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate().validation()?;
        self.camera.validate().validation()?;
        self.sim.validate().validation()?;
        self.envelope.validate().validation()?;
        self.model.validate().validation()?;
        self.train.validate().validation()?;
        self.eval.validate().validation()?;
        wpnav_core::make_path(&self.path).validation()?;
        if self.compare.variants.is_empty() {
            return Err(CliError::validation(anyhow::anyhow!("compare.variants must not be empty")));
        }
        let seeds = [
            self.world_seed,
            self.envelope.seed,
            self.model.extractor.seed,
            self.train.init_seed,
            self.train.shuffle_seed,
            self.eval.eval_seed,
        ];
        if seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(CliError::validation(anyhow::anyhow!("seeds must not exceed {}", i64::MAX)));
        }
        Ok(())
    }

    /// Canonical TOML text: every field present, fixed order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Name of the run directory for this config.
    pub fn run_name(&self) -> String {
        format!("run-{}", &self.hash()[..12])
    }
}
