//! SCK1 checkpoint format.
//!
//! Layout: 4-byte magic `SCK1`, u32 little-endian manifest length, UTF-8 JSON
//! manifest, then little-endian f32 sections in a fixed order: every layer's
//! weights, every layer's biases, the Adam first moments (same layout), then
//! the Adam second moments. All persisted tensors are f32-representable by
//! construction, so a write/read cycle is bitwise lossless.

use super::{AdamState, NetArch, VelocityNetParams};
use crate::error::{Error, Result};
use crate::flowcore::TrainConfig;
use crate::math::Mat;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SCK1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Where a training run stands: RNG stream position, finished epochs and the
/// loss history so far, plus the split recipe the run was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainProgress {
    pub rng_seed: u64,
    pub rng_word_pos: u128,
    pub epochs_completed: usize,
    pub loss_train: Vec<f64>,
    pub loss_heldout: Vec<f64>,
    pub train_fraction: f64,
    pub split_seed: u64,
}

/// Everything needed to resume or evaluate a run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: VelocityNetParams,
    pub adam: AdamState,
    pub train_config: TrainConfig,
    pub progress: TrainProgress,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerManifest {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

/// JSON header of an SCK1 file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub version: u32,
    pub arch: NetArch,
    optimizer: OptimizerManifest,
    rng_seed: u64,
    /// u128 counter position, kept as a decimal string for JSON safety.
    rng_word_pos: String,
    epochs_completed: usize,
    pub train_config: TrainConfig,
    train_fraction: f64,
    split_seed: u64,
    loss_train: Vec<f64>,
    loss_heldout: Vec<f64>,
}

fn push_f32(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn push_net_tensors(out: &mut Vec<u8>, weights: &[Mat], biases: &[Vec<f64>]) {
    for w in weights {
        push_f32(out, w.data());
    }
    for b in biases {
        push_f32(out, b);
    }
}

pub fn write_checkpoint_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        arch: ckpt.params.arch.clone(),
        optimizer: OptimizerManifest {
            beta1: ckpt.adam.beta1,
            beta2: ckpt.adam.beta2,
            eps: ckpt.adam.eps,
            step: ckpt.adam.step,
        },
        rng_seed: ckpt.progress.rng_seed,
        rng_word_pos: ckpt.progress.rng_word_pos.to_string(),
        epochs_completed: ckpt.progress.epochs_completed,
        train_config: ckpt.train_config.clone(),
        train_fraction: ckpt.progress.train_fraction,
        split_seed: ckpt.progress.split_seed,
        loss_train: ckpt.progress.loss_train.clone(),
        loss_heldout: ckpt.progress.loss_heldout.clone(),
    };
    let manifest_json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    push_net_tensors(&mut out, &ckpt.params.weights, &ckpt.params.biases);
    push_net_tensors(&mut out, &ckpt.adam.m_weights, &ckpt.adam.m_biases);
    push_net_tensors(&mut out, &ckpt.adam.v_weights, &ckpt.adam.v_biases);
    out
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint_bytes(ckpt))?;
    Ok(())
}

struct SectionReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> SectionReader<'a> {
    fn take(&mut self, count: usize, field: &str) -> Result<Vec<f64>> {
        let need = count * 4;
        if self.offset + need > self.bytes.len() {
            return Err(Error::format(
                field,
                format!(
                    "payload truncated: needed {need} more bytes at offset {}, {} available",
                    self.offset,
                    self.bytes.len() - self.offset
                ),
            ));
        }
        let out = self.bytes[self.offset..self.offset + need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        self.offset += need;
        Ok(out)
    }

    fn read_net_tensors(
        &mut self,
        widths: &[usize],
        field: &str,
    ) -> Result<(Vec<Mat>, Vec<Vec<f64>>)> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let data = self.take(widths[l + 1] * widths[l], field)?;
            weights.push(Mat::from_vec(widths[l + 1], widths[l], data));
        }
        for l in 0..widths.len() - 1 {
            biases.push(self.take(widths[l + 1], field)?);
        }
        Ok((weights, biases))
    }
}

pub fn read_checkpoint_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format("magic", "expected \"SCK1\" at offset 0"));
    }
    if bytes.len() < 8 {
        return Err(Error::format(
            "manifest_len",
            "file truncated before manifest length",
        ));
    }
    let manifest_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + manifest_len {
        return Err(Error::format(
            "manifest_len",
            format!(
                "manifest length {manifest_len} exceeds remaining {} bytes",
                bytes.len() - 8
            ),
        ));
    }
    let manifest: CheckpointManifest = serde_json::from_slice(&bytes[8..8 + manifest_len])
        .map_err(|e| Error::format("manifest", e.to_string()))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            "version",
            format!(
                "unsupported version {}, expected {CHECKPOINT_VERSION}",
                manifest.version
            ),
        ));
    }
    manifest
        .arch
        .validate()
        .map_err(|e| Error::format("arch", e.to_string()))?;
    let widths = manifest.arch.widths();
    let per_net: usize = (0..widths.len() - 1)
        .map(|l| widths[l + 1] * widths[l] + widths[l + 1])
        .sum();
    let payload = &bytes[8 + manifest_len..];
    if payload.len() != per_net * 3 * 4 {
        return Err(Error::format(
            "payload",
            format!(
                "expected {} bytes for arch hidden_widths {:?} (3 tensors of {per_net} floats), found {}",
                per_net * 12,
                manifest.arch.hidden_widths,
                payload.len()
            ),
        ));
    }
    let mut reader = SectionReader {
        bytes: payload,
        offset: 0,
    };
    let (weights, biases) = reader.read_net_tensors(&widths, "params")?;
    let (m_weights, m_biases) = reader.read_net_tensors(&widths, "adam_m")?;
    let (v_weights, v_biases) = reader.read_net_tensors(&widths, "adam_v")?;
    if v_weights
        .iter()
        .any(|m| m.data().iter().any(|&x| x < 0.0 || !x.is_finite()))
    {
        return Err(Error::format(
            "adam_v",
            "second moments must be finite and nonnegative",
        ));
    }
    let rng_word_pos: u128 = manifest
        .rng_word_pos
        .parse()
        .map_err(|_| Error::format("rng_word_pos", "not a decimal u128"))?;
    let params = VelocityNetParams {
        arch: manifest.arch.clone(),
        weights,
        biases,
    };
    if !params.is_finite() {
        return Err(Error::format("params", "non-finite parameter value"));
    }
    let adam = AdamState {
        m_weights,
        m_biases,
        v_weights,
        v_biases,
        step: manifest.optimizer.step,
        beta1: manifest.optimizer.beta1,
        beta2: manifest.optimizer.beta2,
        eps: manifest.optimizer.eps,
    };
    Ok(Checkpoint {
        params,
        adam,
        train_config: manifest.train_config,
        progress: TrainProgress {
            rng_seed: manifest.rng_seed,
            rng_word_pos,
            epochs_completed: manifest.epochs_completed,
            loss_train: manifest.loss_train,
            loss_heldout: manifest.loss_heldout,
            train_fraction: manifest.train_fraction,
            split_seed: manifest.split_seed,
        },
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    read_checkpoint_bytes(&bytes)
}
