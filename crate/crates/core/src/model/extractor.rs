//! Frozen convolutional feature extractor.
//!
//! Two stride-2 convolution stages with ReLU and no bias, followed by a
//! flatten. Filters are drawn once from a seeded stream (He-uniform scaled by
//! fan-in) and rounded to `f32`; nothing here is ever updated by training.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::rng::{domain, stream_id, Substream};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    /// Output channels of the two stages.
    pub channels: [usize; 2],
    /// Square kernel size; padding is `kernel / 2`.
    pub kernel: usize,
    pub seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self { channels: [8, 4], kernel: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    channels: usize,
    height: usize,
    width: usize,
}

impl Shape {
    fn len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    config: ExtractorConfig,
    input: Shape,
    stage1: Vec<f32>,
    stage2: Vec<f32>,
}

fn strided(n: usize, kernel: usize) -> usize {
    (n + 2 * (kernel / 2) - kernel) / 2 + 1
}

impl FeatureExtractor {
    pub fn new(config: &ExtractorConfig, width: usize, height: usize) -> Result<Self, ModelError> {
        let (n1, n2) = Self::weight_lens(config);
        let mut rng = Substream::new(config.seed, stream_id(domain::EXTRACTOR, 0, 0)).sequential();
        let mut draw = |n: usize, fan_in: usize| -> Vec<f32> {
            let bound = libm::sqrt(6.0 / fan_in as f64);
            (0..n).map(|_| ((2.0 * rng.gen::<f64>() - 1.0) * bound) as f32).collect()
        };
        let k2 = config.kernel * config.kernel;
        let stage1 = draw(n1, k2);
        let stage2 = draw(n2, k2 * config.channels[0]);
        Self::from_weights(config, width, height, stage1, stage2)
    }

    /// Rebuilds an extractor from stored filters.
    pub fn from_weights(
        config: &ExtractorConfig,
        width: usize,
        height: usize,
        stage1: Vec<f32>,
        stage2: Vec<f32>,
    ) -> Result<Self, ModelError> {
        if config.kernel == 0 || config.kernel.is_multiple_of(2) || config.channels.contains(&0) {
            return Err(ModelError::InvalidSpec("kernel must be odd and channels non-zero"));
        }
        if width < config.kernel || height < config.kernel {
            return Err(ModelError::InvalidSpec("frame smaller than the kernel"));
        }
        let (n1, n2) = Self::weight_lens(config);
        if stage1.len() != n1 || stage2.len() != n2 {
            return Err(ModelError::ShapeMismatch { expected: n1 + n2, got: stage1.len() + stage2.len() });
        }
        Ok(Self {
            config: config.clone(),
            input: Shape { channels: 1, height, width },
            stage1,
            stage2,
        })
    }

    fn weight_lens(config: &ExtractorConfig) -> (usize, usize) {
        let k2 = config.kernel * config.kernel;
        (config.channels[0] * k2, config.channels[1] * config.channels[0] * k2)
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    fn stage_shapes(&self) -> (Shape, Shape) {
        let k = self.config.kernel;
        let s1 = Shape {
            channels: self.config.channels[0],
            height: strided(self.input.height, k),
            width: strided(self.input.width, k),
        };
        let s2 = Shape {
            channels: self.config.channels[1],
            height: strided(s1.height, k),
            width: strided(s1.width, k),
        };
        (s1, s2)
    }

    pub fn output_dim(&self) -> usize {
        self.stage_shapes().1.len()
    }

    pub fn weights(&self) -> (&[f32], &[f32]) {
        (&self.stage1, &self.stage2)
    }

    /// SHA-256 over the little-endian filter bytes.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for w in self.stage1.iter().chain(&self.stage2) {
            h.update(w.to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn extract(&self, frame: &[f32]) -> Result<Vec<f32>, ModelError> {
        if frame.len() != self.input.len() {
            return Err(ModelError::ShapeMismatch { expected: self.input.len(), got: frame.len() });
        }
        let input: Vec<f64> = frame.iter().map(|&p| p as f64).collect();
        let (s1, s2) = self.stage_shapes();
        let a = conv_relu(&input, self.input, &self.stage1, s1, self.config.kernel);
        let b = conv_relu(&a, s1, &self.stage2, s2, self.config.kernel);
        Ok(b.into_iter().map(|v| v as f32).collect())
    }
}

fn conv_relu(input: &[f64], ins: Shape, weights: &[f32], outs: Shape, k: usize) -> Vec<f64> {
    let pad = k / 2;
    let plane_len = ins.height * ins.width;
    let mut out = alloc::vec![0.0; outs.len()];
    // Taps outermost, pixels innermost; each output still sums its
    // (channel, row, column) taps in order.
    for (oc, dst) in out.chunks_exact_mut(outs.height * outs.width).enumerate() {
        for ic in 0..ins.channels {
            let w = &weights[(oc * ins.channels + ic) * k * k..][..k * k];
            let plane = &input[ic * plane_len..][..plane_len];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[ky * k + kx] as f64;
                    let (x_lo, x_hi) = valid_range(outs.width, ins.width, kx, pad);
                    for oy in 0..outs.height {
                        let Some(iy) = (oy * 2 + ky).checked_sub(pad).filter(|&y| y < ins.height) else {
                            continue;
                        };
                        let src = &plane[iy * ins.width..][..ins.width];
                        let row = &mut dst[oy * outs.width..][..outs.width];
                        for ox in x_lo..x_hi {
                            row[ox] += wv * src[ox * 2 + kx - pad];
                        }
                    }
                }
            }
        }
    }
    for v in &mut out {
        *v = v.max(0.0);
    }
    out
}

/// Output columns whose tap `kx` lands inside the input row.
fn valid_range(out_width: usize, in_width: usize, kx: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kx).div_ceil(2);
    let hi = (0..out_width).take_while(|&ox| ox * 2 + kx < in_width + pad).count();
    (lo.min(hi), hi)
}
