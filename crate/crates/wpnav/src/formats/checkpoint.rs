//! Model checkpoints.
//!
//! Layout: the 8-byte magic `WPNAVCKP`, a little-endian `u32` format
//! version, a little-endian `u32` header length, a UTF-8 JSON header, then
//! the parameter blocks listed in the header as consecutive little-endian
//! `f32` arrays.

use std::path::Path;

use anyhow::{anyhow, bail, ensure};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wpnav_core::model::{FeatureNorm, ModelSpec, TrainingRecord};
use wpnav_core::Model;

use super::{read_bytes, write_bytes};
use crate::error::{Classify, Result};

pub const MAGIC: &[u8; 8] = b"WPNAVCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format_version: u32,
    pub variant: String,
    /// `[width, height]` of input frames.
    pub frame: [usize; 2],
    pub spec: ModelSpec,
    pub training: Option<TrainingRecord>,
    /// SHA-256 of the frozen extractor weights.
    pub extractor_digest: String,
    pub blocks: Vec<Block>,
    /// SHA-256 of the parameter payload.
    pub payload_digest: String,
}

const BLOCK_NAMES: [&str; 5] = ["extractor.stage1", "extractor.stage2", "norm.mean", "norm.scale", "regressor"];

fn f32_exact(v: f64) -> bool {
    (v as f32) as f64 == v || v.is_nan()
}

pub fn to_bytes(model: &Model) -> anyhow::Result<Vec<u8>> {
    let params = model.regressor.params();
    ensure!(params.iter().all(|&p| f32_exact(p)), "regressor parameters are not at f32 storage precision");
    let (s1, s2) = model.extractor.weights();
    let regressor: Vec<f32> = params.iter().map(|&p| p as f32).collect();
    let arrays: [&[f32]; 5] = [s1, s2, &model.norm.mean, &model.norm.scale, &regressor];
    let payload: Vec<u8> = arrays.iter().flat_map(|a| a.iter().flat_map(|v| v.to_le_bytes())).collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        variant: model.kind().to_string(),
        frame: [model.frame_width, model.frame_height],
        spec: model.spec.clone(),
        training: model.training.clone(),
        extractor_digest: hex::encode(model.extractor.digest()),
        blocks: BLOCK_NAMES.iter().zip(arrays).map(|(n, a)| Block { name: (*n).into(), len: a.len() }).collect(),
        payload_digest: hex::encode(Sha256::digest(&payload)),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(header.len())?.to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> anyhow::Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| anyhow!("checkpoint truncated"))?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn read_header(bytes: &[u8]) -> anyhow::Result<(Header, &[u8])> {
    ensure!(bytes.len() >= 16 && &bytes[..8] == MAGIC, "not a checkpoint file");
    let version = u32_at(bytes, 8)?;
    ensure!(version == FORMAT_VERSION, "checkpoint format version {version} is not supported");
    let len = u32_at(bytes, 12)? as usize;
    let header_bytes = bytes.get(16..16 + len).ok_or_else(|| anyhow!("checkpoint header truncated"))?;
    let header: Header = serde_json::from_slice(header_bytes)?;
    ensure!(header.format_version == version, "header version disagrees with file version");
    Ok((header, &bytes[16 + len..]))
}

pub fn from_bytes(bytes: &[u8]) -> anyhow::Result<Model> {
    let (header, payload) = read_header(bytes)?;
    let names: Vec<&str> = header.blocks.iter().map(|b| b.name.as_str()).collect();
    ensure!(names == BLOCK_NAMES, "unexpected parameter blocks {names:?}");
    let total: usize = header.blocks.iter().map(|b| b.len * 4).sum();
    ensure!(payload.len() == total, "payload is {} bytes, header describes {total}", payload.len());
    ensure!(hex::encode(Sha256::digest(payload)) == header.payload_digest, "payload digest mismatch");
    let mut values = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f32>>();
    let b = &header.blocks;
    let s1 = take(b[0].len);
    let s2 = take(b[1].len);
    let norm = FeatureNorm { mean: take(b[2].len), scale: take(b[3].len) };
    let params = take(b[4].len).into_iter().map(f64::from).collect();
    let [w, h] = header.frame;
    let model = Model::from_parts(&header.spec, w, h, (s1, s2), norm, params, header.training.clone())
        .map_err(|e| anyhow!("checkpoint shapes are inconsistent: {e}"))?;
    if model.kind().to_string() != header.variant {
        bail!("header variant {} disagrees with spec {}", header.variant, model.kind());
    }
    ensure!(hex::encode(model.extractor.digest()) == header.extractor_digest, "extractor digest mismatch");
    Ok(model)
}

pub fn write_checkpoint(path: &Path, model: &Model) -> Result<()> {
    write_bytes(path, &to_bytes(model).runtime()?)
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let bytes = read_bytes(path, "checkpoint")?;
    from_bytes(&bytes).map_err(|e| e.context(format!("loading {}", path.display()))).validation()
}
