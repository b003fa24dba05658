//! Minibatch Adam training of the regressor on cached extractor features.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, AdamConfig, AdamState, Example, FeatureNorm, Model, ModelError, ModelSpec};
use crate::envelope::{sequence_windows, Dataset};
use crate::rng::{domain, stream_id, Substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// The learning rate halves every this many epochs.
    pub lr_halving_period: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub shuffle_seed: u64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: 1e-4,
            batch_size: 64,
            epochs: 100,
            lr_halving_period: 25,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            shuffle_seed: 0,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m| Err(ModelError::InvalidConfig(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.lr_halving_period == 0 {
            return bad("lr_halving_period must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }

    /// Step size used throughout epoch `epoch` (zero-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let mut lr = self.learning_rate;
        for _ in 0..epoch / self.lr_halving_period {
            lr *= 0.5;
        }
        lr
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { beta1: self.adam_beta1, beta2: self.adam_beta2, epsilon: self.adam_epsilon }
    }
}

/// Provenance stored alongside trained weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub path_id: String,
    pub windows: usize,
    pub optimizer_steps: u64,
    pub final_loss: f64,
}

/// Mean training loss of each epoch, accumulated over its minibatches
/// before each update.
pub type LossCurve = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub loss_curve: LossCurve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
}

pub fn train(dataset: &Dataset, spec: &ModelSpec, config: &TrainConfig) -> Result<TrainOutcome, ModelError> {
    train_with(dataset, spec, config, |_| {})
}

/// Trains a fresh model, calling `on_epoch` after every epoch.
pub fn train_with(
    dataset: &Dataset,
    spec: &ModelSpec,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(EpochReport),
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    let [_, height, width] = dataset.manifest.frame_shape;
    let mut model = Model::new(spec, width, height, config.init_seed)?;
    model.regressor.round_to_storage();

    let windows = sequence_windows(dataset, spec.kind.timesteps());
    if windows.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut features = (0..dataset.frame_count())
        .map(|i| model.extractor.extract(dataset.frame(i)))
        .collect::<Result<Vec<_>, _>>()?;
    if features.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    model.norm = FeatureNorm::fit(&features);
    for f in &mut features {
        model.norm.apply(f);
    }

    let adam = config.adam();
    let mut state = AdamState::new(model.regressor.param_count());
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        let mut rng = Substream::new(config.shuffle_seed, stream_id(domain::SHUFFLE, epoch as u32, 0)).sequential();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example> = chunk
                .iter()
                .map(|&i| Example {
                    inputs: windows[i].frame_refs.iter().map(|&f| features[f].as_slice()).collect(),
                    label: windows[i].label,
                })
                .collect();
            let (report, grad) = backward(&model.regressor, &batch)?;
            sum += report.mse * report.n as f64;
            adam_step(model.regressor.params_mut(), &grad, &mut state, lr, &adam);
            model.regressor.round_to_storage();
        }
        let loss = sum / windows.len() as f64;
        curve.push(loss);
        on_epoch(EpochReport { epoch, learning_rate: lr, loss });
    }

    model.training = Some(TrainingRecord {
        config: config.clone(),
        path_id: dataset.manifest.path_id.clone(),
        windows: windows.len(),
        optimizer_steps: state.t,
        final_loss: curve.last().copied().unwrap_or(f64::NAN),
    });
    Ok(TrainOutcome { model, loss_curve: curve })
}
