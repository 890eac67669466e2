use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::module::{AlignmentBatch, AlignmentModule, LossWeights, TotalLoss};
use crate::error::{MsfError, Result};
use crate::semantic::FusedSemantics;
use crate::tensor::{adam_step, AdamConfig, AdamState, Matrix, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    pub latent_dim: usize,
    /// Encoder hidden widths; decoders mirror them.
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub align_norm: super::AlignNorm,
    /// Ramp β linearly from 0 over the first 10% of epochs.
    pub beta_warmup: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            latent_dim: 100,
            hidden: vec![256],
            alpha: 1.0,
            beta: 1.0,
            align_norm: super::AlignNorm::L2,
            beta_warmup: false,
            epochs: 1900,
            batch_size: 64,
            lr: 1e-4,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(MsfError::Config("latent_dim must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(MsfError::Config("batch_size must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(MsfError::Config("hidden widths must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.lr >= 0.0) {
            return Err(MsfError::Config("alpha, beta and lr must be non-negative".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            align_norm: self.align_norm,
        }
    }

    /// β used during `epoch` (0-based).
    pub fn beta_at(&self, epoch: usize) -> f64 {
        if !self.beta_warmup {
            return self.beta;
        }
        let ramp = (self.epochs as f64 * 0.1).ceil().max(1.0);
        self.beta * ((epoch + 1) as f64 / ramp).min(1.0)
    }
}

/// Sample-weighted mean of each loss term over one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon_skeleton: f64,
    pub kl_skeleton: f64,
    pub align_skeleton: f64,
    pub recon_text: f64,
    pub kl_text: f64,
    pub align_text: f64,
}

impl EpochLoss {
    fn accumulate(&mut self, l: &TotalLoss, w: f64) {
        self.total += w * l.total;
        self.recon_skeleton += w * l.skeleton.parts.recon;
        self.kl_skeleton += w * l.skeleton.parts.kl;
        self.align_skeleton += w * l.skeleton.parts.align;
        self.recon_text += w * l.text.parts.recon;
        self.kl_text += w * l.text.parts.kl;
        self.align_text += w * l.text.parts.align;
    }
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

/// Trains the alignment module on seen-class skeleton features, pairing each
/// sample with its class prototype. Deterministic for a given seed.
pub fn train_alignment(
    features: &Matrix,
    labels: &[u32],
    prototypes: &FusedSemantics,
    config: &AlignmentConfig,
    seed: u64,
) -> Result<(AlignmentModule, Vec<EpochLoss>)> {
    config.validate()?;
    if features.rows() != labels.len() {
        return Err(MsfError::Shape(format!(
            "{} feature rows with {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if features.rows() == 0 {
        return Err(MsfError::EmptyInput("no training samples for alignment".into()));
    }
    let text = prototypes.gather(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut module = AlignmentModule::init(
        features.cols(),
        prototypes.dim(),
        &config.hidden,
        config.latent_dim,
        config.weights(),
        &mut rng,
    )?;
    let trace = fit_alignment(&mut module, features, &text, config, &mut rng)?;
    Ok((module, trace))
}

/// Runs the optimization loop on an existing module. `text` holds the
/// prototype row for each feature row.
pub fn fit_alignment<R: Rng + ?Sized>(
    module: &mut AlignmentModule,
    features: &Matrix,
    text: &Matrix,
    config: &AlignmentConfig,
    rng: &mut R,
) -> Result<Vec<EpochLoss>> {
    let n = features.rows();
    let latent = module.latent_dim();
    let mut adam = AdamState::for_tensors(AdamConfig::with_lr(config.lr), &module.tensors());
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let weights = LossWeights {
            beta: config.beta_at(epoch),
            ..config.weights()
        };
        order.shuffle(rng);
        let mut acc = EpochLoss {
            epoch,
            ..Default::default()
        };
        for chunk in order.chunks(config.batch_size) {
            let skel = features.select_rows(chunk);
            let txt = text.select_rows(chunk);
            let eps_s = standard_normal_matrix(chunk.len(), latent, rng);
            let eps_t = standard_normal_matrix(chunk.len(), latent, rng);
            let batch = AlignmentBatch {
                skeleton: &skel,
                text: &txt,
                eps_skeleton: &eps_s,
                eps_text: &eps_t,
            };
            let (loss, grad) = module
                .total_loss_grad(&batch, weights)
                .map_err(|e| diverged(epoch, e.to_string()))?;
            acc.accumulate(&loss, chunk.len() as f64 / n as f64);
            let grads = grad.tensors();
            adam_step(&mut module.tensors_mut(), &grads, &mut adam)?;
        }
        if !acc.total.is_finite() || !module.is_finite() {
            return Err(diverged(epoch, format!("epoch loss {}", acc.total)));
        }
        trace.push(acc);
    }
    Ok(trace)
}

fn diverged(epoch: usize, reason: String) -> MsfError {
    MsfError::Diverged {
        epoch,
        last_good: epoch.checked_sub(1),
        reason,
    }
}

/// Draws `n_per_class` latent samples from the text posterior of each class
/// prototype. Rows are grouped by class in the order of `class_ids`.
pub fn synthesize_latents(
    module: &AlignmentModule,
    prototypes: &FusedSemantics,
    class_ids: &[u32],
    n_per_class: usize,
    seed: u64,
) -> Result<(Matrix, Vec<u32>)> {
    let protos = prototypes.gather(class_ids)?;
    let post = module.text.encode(&protos)?;
    let latent = module.latent_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Matrix::zeros(class_ids.len() * n_per_class, latent);
    let mut labels = Vec::with_capacity(class_ids.len() * n_per_class);
    for (c, &id) in class_ids.iter().enumerate() {
        let mu = post.mu.row(c);
        let sigma: Vec<f64> = post.log_var.row(c).iter().map(|lv| (0.5 * lv).exp()).collect();
        for k in 0..n_per_class {
            let row = out.row_mut(c * n_per_class + k);
            for ((z, m), s) in row.iter_mut().zip(mu).zip(&sigma) {
                let e: f64 = rng.sample(StandardNormal);
                *z = m + s * e;
            }
            labels.push(id);
        }
    }
    Ok((out, labels))
}

/// Deterministic latent embedding of skeleton features: the posterior mean.
pub fn embed_skeleton(module: &AlignmentModule, features: &Matrix) -> Result<Matrix> {
    Ok(module.skeleton.encode(features)?.mu)
}

/// Posterior mean of the text encoder for each prototype row.
pub fn embed_text(module: &AlignmentModule, prototypes: &Matrix) -> Result<Matrix> {
    Ok(module.text.encode(prototypes)?.mu)
}
