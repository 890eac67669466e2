//! Model checkpoints.
//!
//! Layout: magic `MSFC`, u16 version, u32 header length, a TOML header, then
//! one f64 `MSFF` record per tensor. Tensor order is every dense layer of the
//! skeleton branch, then the text branch (trunk, mu head, log-variance head,
//! decoder), then the seen head and the unseen head, each as the weight
//! matrix followed by the bias as a single row. The last record is the gate,
//! one row holding its weights then its bias.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::atomic_write;
use super::feature_file::{decode_features_prefix, encode_features, Dtype};
use crate::classifier::{ClassifierHead, GateFeatureMode, GateModel, GzslModel};
use crate::error::{MsfError, Result};
use crate::semantic::SemanticMode;
use crate::tensor::{DenseLayer, Matrix};
use crate::vae::{AlignNorm, AlignmentModule, LossWeights};

pub const MAGIC: &[u8; 4] = b"MSFC";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub name: String,
    pub seed: u64,
    /// Alignment epochs trained.
    pub epochs: usize,
    pub semantic_mode: SemanticMode,
    pub split_name: String,
    pub seen_ids: Vec<u32>,
    pub unseen_ids: Vec<u32>,
    pub pseudo_unseen: Vec<u32>,
    pub skeleton_dim: usize,
    pub text_dim: usize,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub align_norm: AlignNorm,
    pub gate_features: GateFeatureMode,
    pub gate_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: GzslModel,
}

fn push_layer(out: &mut Vec<u8>, layer: &DenseLayer) -> Result<()> {
    out.extend(encode_features(&layer.weight, None, Dtype::F64)?);
    let bias = Matrix::from_vec(1, layer.bias.len(), layer.bias.clone())?;
    out.extend(encode_features(&bias, None, Dtype::F64)?);
    Ok(())
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let header = toml::to_string(&ckpt.header)
        .map_err(|e| MsfError::Format(format!("cannot serialize checkpoint header: {e}")))?;
    let m = &ckpt.model;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for layer in m.module.skeleton.layers().into_iter().chain(m.module.text.layers()) {
        push_layer(&mut out, layer)?;
    }
    push_layer(&mut out, &m.seen_head.layer)?;
    push_layer(&mut out, &m.unseen_head.layer)?;
    let mut gate = m.gate.weights.clone();
    gate.push(m.gate.bias);
    out.extend(encode_features(&Matrix::from_vec(1, gate.len(), gate)?, None, Dtype::F64)?);
    Ok(out)
}

struct Records<'a> {
    bytes: &'a [u8],
}

impl Records<'_> {
    fn next(&mut self, what: &str) -> Result<Matrix> {
        if self.bytes.is_empty() {
            return Err(MsfError::Length(format!("checkpoint ends before {what}")));
        }
        let ((m, labels), used) = decode_features_prefix(self.bytes)?;
        if labels.is_some() {
            return Err(MsfError::Format(format!("{what} record carries labels")));
        }
        self.bytes = &self.bytes[used..];
        Ok(m)
    }

    fn expect(&mut self, what: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let m = self.next(what)?;
        if m.shape() != (rows, cols) {
            return Err(MsfError::Shape(format!(
                "{what} is {:?}, expected ({rows}, {cols})",
                m.shape()
            )));
        }
        Ok(m)
    }

    fn load_layer(&mut self, what: &str, layer: &mut DenseLayer) -> Result<()> {
        let (o, i) = layer.weight.shape();
        layer.weight = self.expect(what, o, i)?;
        layer.bias = self.expect(what, 1, o)?.into_vec();
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 10 {
        return Err(MsfError::Length(format!("checkpoint is {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(MsfError::Format("not a checkpoint (bad magic)".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(MsfError::Format(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let body = &bytes[10..];
    if body.len() < hlen {
        return Err(MsfError::Length("checkpoint header truncated".into()));
    }
    let text = std::str::from_utf8(&body[..hlen])
        .map_err(|_| MsfError::Format("checkpoint header is not UTF-8".into()))?;
    let header: CheckpointHeader =
        toml::from_str(text).map_err(|e| MsfError::Format(format!("checkpoint header: {e}")))?;

    // shapes come from a freshly initialized module; values are overwritten
    let weights = LossWeights {
        alpha: header.alpha,
        beta: header.beta,
        align_norm: header.align_norm,
    };
    let mut module = AlignmentModule::init(
        header.skeleton_dim,
        header.text_dim,
        &header.hidden,
        header.latent_dim,
        weights,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let mut rec = Records { bytes: &body[hlen..] };
    for layer in module.skeleton.layers_mut() {
        rec.load_layer("skeleton layer", layer)?;
    }
    for layer in module.text.layers_mut() {
        rec.load_layer("text layer", layer)?;
    }
    let mut head = |what: &str, in_dim: usize, ids: &[u32]| -> Result<ClassifierHead> {
        let mut layer = DenseLayer::zeros(in_dim, ids.len(), crate::tensor::Activation::Identity);
        rec.load_layer(what, &mut layer)?;
        ClassifierHead::new(layer, ids.to_vec())
    };
    let seen_head = head("seen head", header.skeleton_dim, &header.seen_ids)?;
    let unseen_head = head("unseen head", header.latent_dim, &header.unseen_ids)?;
    let g = rec.next("gate")?;
    if g.rows() != 1 || g.cols() == 0 {
        return Err(MsfError::Shape(format!("gate record is {:?}", g.shape())));
    }
    let mut w = g.into_vec();
    let bias = w.pop().expect("non-empty");
    if !rec.bytes.is_empty() {
        return Err(MsfError::Format(format!("{} trailing bytes after checkpoint", rec.bytes.len())));
    }
    let gate = GateModel {
        weights: w,
        bias,
        threshold: header.gate_threshold,
    };
    Ok(Checkpoint {
        model: GzslModel {
            module,
            seen_head,
            unseen_head,
            gate,
            gate_features: header.gate_features,
        },
        header,
    })
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    atomic_write(path.as_ref(), &encode_checkpoint(ckpt)?)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| MsfError::io(path, e))?;
    decode_checkpoint(&bytes)
}
