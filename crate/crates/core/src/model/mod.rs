//! Frozen-extractor regression models for relative-yaw prediction.
//!
//! A [`Model`] is a [`FeatureExtractor`] (fixed filters, never trained)
//! followed by a trainable [`Regressor`]: either a two-layer feedforward
//! network on one frame or a GRU over a window of consecutive frames. The
//! output is an unbounded scalar in radians; callers wrap it at the control
//! boundary. Trainable parameters are `f64` during arithmetic but are kept
//! at `f32` precision between updates, so checkpoints round-trip exactly.

mod adam;
mod dense;
mod extractor;
mod fcnn;
mod gru;
mod train;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use extractor::{ExtractorConfig, FeatureExtractor};
pub use fcnn::Fcnn;
pub use gru::Gru;
pub use train::{train, train_with, EpochReport, LossCurve, TrainConfig, TrainOutcome, TrainingRecord};

use crate::rng::{domain, stream_id, Substream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("expected a window of {expected} frames, got {got}")]
    WindowMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("predictions and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("dataset yields no training examples")]
    EmptyDataset,
    #[error("invalid model spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid train config: {0}")]
    InvalidConfig(&'static str),
}

/// Which regressor sits on top of the extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RegressorKind {
    Fcnn,
    Gru { timesteps: usize },
}

impl RegressorKind {
    /// Frames consumed per prediction.
    pub fn timesteps(&self) -> usize {
        match self {
            RegressorKind::Fcnn => 1,
            RegressorKind::Gru { timesteps } => *timesteps,
        }
    }

    /// The three variants compared by the evaluation protocol.
    pub fn standard() -> [RegressorKind; 3] {
        [RegressorKind::Fcnn, RegressorKind::Gru { timesteps: 2 }, RegressorKind::Gru { timesteps: 4 }]
    }

    /// Lower-case file stem, e.g. `gru4`.
    pub fn slug(&self) -> String {
        match self {
            RegressorKind::Fcnn => "fcnn".into(),
            RegressorKind::Gru { timesteps } => alloc::format!("gru{timesteps}"),
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorKind::Fcnn => f.write_str("FCNN"),
            RegressorKind::Gru { timesteps } => write!(f, "GRU-{timesteps}"),
        }
    }
}

impl FromStr for RegressorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        if lower == "fcnn" {
            return Ok(RegressorKind::Fcnn);
        }
        let t = lower
            .strip_prefix("gru-")
            .or_else(|| lower.strip_prefix("gru"))
            .and_then(|t| t.parse::<usize>().ok())
            .filter(|&t| t >= 1)
            .ok_or_else(|| alloc::format!("unknown regressor variant `{s}`"))?;
        Ok(RegressorKind::Gru { timesteps: t })
    }
}

impl TryFrom<String> for RegressorKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<RegressorKind> for String {
    fn from(k: RegressorKind) -> String {
        k.to_string()
    }
}

/// Architecture of a model; together with the seeds this fixes the
/// initial parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: RegressorKind,
    pub extractor: ExtractorConfig,
    pub fcnn_hidden: [usize; 2],
    pub gru_hidden: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: RegressorKind::Fcnn,
            extractor: ExtractorConfig::default(),
            fcnn_hidden: [64, 32],
            gru_hidden: 64,
        }
    }
}

impl ModelSpec {
    pub fn with_kind(&self, kind: RegressorKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kind.timesteps() == 0 {
            return Err(ModelError::InvalidSpec("GRU window must be at least one frame"));
        }
        if self.fcnn_hidden.contains(&0) || self.gru_hidden == 0 {
            return Err(ModelError::InvalidSpec("hidden widths must be non-zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Fcnn(Fcnn),
    Gru(Gru),
}

pub(crate) enum Cache {
    Fcnn(fcnn::FcnnCache),
    Gru(gru::GruCache),
}

impl Regressor {
    pub fn params(&self) -> &[f64] {
        match self {
            Regressor::Fcnn(m) => &m.params,
            Regressor::Gru(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Regressor::Fcnn(m) => &mut m.params,
            Regressor::Gru(m) => &mut m.params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    pub(crate) fn forward_cached(&self, window: &[&[f32]]) -> (f64, Cache) {
        match self {
            Regressor::Fcnn(m) => {
                let (y, c) = m.forward_cached(window[0]);
                (y, Cache::Fcnn(c))
            }
            Regressor::Gru(m) => {
                let (y, c) = m.forward_cached(window);
                (y, Cache::Gru(c))
            }
        }
    }

    pub fn forward(&self, window: &[&[f32]]) -> f64 {
        match self {
            Regressor::Fcnn(m) => m.forward(window[0]),
            Regressor::Gru(m) => m.forward(window),
        }
    }

    pub(crate) fn backward(&self, cache: &Cache, d_out: f64, grad: &mut [f64]) {
        match (self, cache) {
            (Regressor::Fcnn(m), Cache::Fcnn(c)) => m.backward(c, d_out, grad),
            (Regressor::Gru(m), Cache::Gru(c)) => m.backward(c, d_out, grad),
            _ => unreachable!("cache built by a different regressor"),
        }
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_to_storage(&mut self) {
        for p in self.params_mut() {
            *p = (*p as f32) as f64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub n: usize,
    pub mse: f64,
}

/// `(1/n)·Σ(yᵢ - pᵢ)²`.
pub fn loss(predictions: &[f64], labels: &[f64]) -> Result<LossReport, ModelError> {
    if predictions.len() != labels.len() {
        return Err(ModelError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let sum: f64 = predictions.iter().zip(labels).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(LossReport { n: labels.len(), mse: sum / labels.len() as f64 })
}

/// One training example in feature space: a window of extracted feature
/// vectors and its label.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub inputs: Vec<&'a [f32]>,
    pub label: f64,
}

/// Centring and scaling fitted to the training features and applied between
/// the extractor and the regressor. Every dimension is centred on its mean
/// and multiplied by one shared factor, the inverse RMS of the per-dimension
/// standard deviations; constant dimensions get a zero scale. A shared
/// factor keeps rarely active dimensions from being blown up.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f32>,
    pub scale: Vec<f32>,
}

impl FeatureNorm {
    pub fn identity(dim: usize) -> Self {
        Self { mean: alloc::vec![0.0; dim], scale: alloc::vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// # Panics
    ///
    /// If `features` is empty or the vectors differ in length.
    pub fn fit(features: &[Vec<f32>]) -> Self {
        let d = features[0].len();
        let n = features.len() as f64;
        let mut mean = alloc::vec![0.0f64; d];
        for f in features {
            assert_eq!(f.len(), d, "feature length");
            for (m, &x) in mean.iter_mut().zip(f) {
                *m += x as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0f64; d];
        for f in features {
            for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(f) {
                *v += (x as f64 - m) * (x as f64 - m);
            }
        }
        let live = |v: &f64| *v / n > 1e-12;
        let count = var.iter().filter(|v| live(v)).count();
        let rms = libm::sqrt(var.iter().filter(|v| live(v)).map(|v| v / n).sum::<f64>() / count.max(1) as f64);
        let shared = if count > 0 { (1.0 / rms) as f32 } else { 0.0 };
        let scale = var.iter().map(|v| if live(v) { shared } else { 0.0 }).collect();
        Self { mean: mean.iter().map(|&m| m as f32).collect(), scale }
    }

    pub fn apply(&self, features: &mut [f32]) {
        for ((x, m), s) in features.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) * s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub frame_width: usize,
    pub frame_height: usize,
    pub extractor: FeatureExtractor,
    pub norm: FeatureNorm,
    pub regressor: Regressor,
    pub training: Option<TrainingRecord>,
}

impl Model {
    /// Fresh model for frames of the given size; `init_seed` drives the
    /// regressor initialisation.
    pub fn new(spec: &ModelSpec, frame_width: usize, frame_height: usize, init_seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let extractor = FeatureExtractor::new(&spec.extractor, frame_width, frame_height)?;
        let d = extractor.output_dim();
        let mut rng = Substream::new(init_seed, stream_id(domain::INIT, 0, 0)).sequential();
        let regressor = match spec.kind {
            RegressorKind::Fcnn => Regressor::Fcnn(Fcnn::new(d, spec.fcnn_hidden, &mut rng)),
            RegressorKind::Gru { .. } => Regressor::Gru(Gru::new(d, spec.gru_hidden, &mut rng)),
        };
        let norm = FeatureNorm::identity(d);
        Ok(Self { spec: spec.clone(), frame_width, frame_height, extractor, norm, regressor, training: None })
    }

    /// Reassembles a model from stored weights, validating every shape.
    pub fn from_parts(
        spec: &ModelSpec,
        frame_width: usize,
        frame_height: usize,
        extractor_weights: (Vec<f32>, Vec<f32>),
        norm: FeatureNorm,
        regressor_params: Vec<f64>,
        training: Option<TrainingRecord>,
    ) -> Result<Self, ModelError> {
        spec.validate()?;
        let extractor = FeatureExtractor::from_weights(
            &spec.extractor,
            frame_width,
            frame_height,
            extractor_weights.0,
            extractor_weights.1,
        )?;
        let d = extractor.output_dim();
        if norm.mean.len() != d || norm.scale.len() != d {
            return Err(ModelError::ShapeMismatch { expected: d, got: norm.mean.len().max(norm.scale.len()) });
        }
        let got = regressor_params.len();
        let regressor = match spec.kind {
            RegressorKind::Fcnn => Fcnn::from_params(d, spec.fcnn_hidden, regressor_params)
                .map(Regressor::Fcnn)
                .ok_or(ModelError::ShapeMismatch { expected: Fcnn::param_count_for(d, spec.fcnn_hidden), got })?,
            RegressorKind::Gru { .. } => Gru::from_params(d, spec.gru_hidden, regressor_params)
                .map(Regressor::Gru)
                .ok_or(ModelError::ShapeMismatch { expected: Gru::param_count_for(d, spec.gru_hidden), got })?,
        };
        Ok(Self { spec: spec.clone(), frame_width, frame_height, extractor, norm, regressor, training })
    }

    pub fn kind(&self) -> RegressorKind {
        self.spec.kind
    }

    pub fn timesteps(&self) -> usize {
        self.spec.kind.timesteps()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_width * self.frame_height
    }

    /// Normalised regressor input for one raw frame.
    pub fn encode(&self, frame: &[f32]) -> Result<Vec<f32>, ModelError> {
        let mut f = self.extractor.extract(frame)?;
        self.norm.apply(&mut f);
        Ok(f)
    }

    /// Predicted relative yaw for a window of raw frames, oldest first.
    pub fn forward(&self, frames: &[&[f32]]) -> Result<f64, ModelError> {
        if frames.len() != self.timesteps() {
            return Err(ModelError::WindowMismatch { expected: self.timesteps(), got: frames.len() });
        }
        let features = frames.iter().map(|f| self.encode(f)).collect::<Result<Vec<_>, _>>()?;
        let views: Vec<&[f32]> = features.iter().map(|f| f.as_slice()).collect();
        Ok(self.regressor.forward(&views))
    }

    /// Predicted relative yaw from already encoded frames.
    pub fn forward_features(&self, features: &[&[f32]]) -> f64 {
        self.regressor.forward(features)
    }

    /// MSE over `batch` and its exact gradient with respect to every
    /// regressor parameter. The extractor receives no gradient.
    pub fn backward(&self, batch: &[Example<'_>]) -> Result<(LossReport, Vec<f64>), ModelError> {
        backward(&self.regressor, batch)
    }
}

pub(crate) fn backward(regressor: &Regressor, batch: &[Example<'_>]) -> Result<(LossReport, Vec<f64>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grad = alloc::vec![0.0; regressor.param_count()];
    if let Regressor::Fcnn(m) = regressor {
        let sum = m.backward_batch(batch, &mut grad);
        return Ok((LossReport { n: batch.len(), mse: sum / n }, grad));
    }
    let mut sum = 0.0;
    for ex in batch {
        let (p, cache) = regressor.forward_cached(&ex.inputs);
        let err = p - ex.label;
        sum += err * err;
        regressor.backward(&cache, 2.0 * err / n, &mut grad);
    }
    Ok((LossReport { n: batch.len(), mse: sum / n }, grad))
}
