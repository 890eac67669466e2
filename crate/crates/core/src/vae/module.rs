use rand::Rng;
use serde::{Deserialize, Serialize};

use super::branch::{Modality, VaeBranch};
use crate::error::{MsfError, Result};
use crate::tensor::{l2_norm, Matrix, Params};

/// Distance used by the cross-reconstruction alignment term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignNorm {
    /// Euclidean norm of the residual.
    #[default]
    L2,
    /// Squared Euclidean norm.
    SquaredL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub align_norm: AlignNorm,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 1.0,
            align_norm: AlignNorm::L2,
        }
    }
}

/// Unweighted loss terms of one branch, each a mean over the batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub recon: f64,
    pub kl: f64,
    pub align: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BranchLoss {
    pub total: f64,
    pub parts: LossParts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TotalLoss {
    pub total: f64,
    pub skeleton: BranchLoss,
    pub text: BranchLoss,
}

/// Paired skeleton and text rows with the reparameterization noise for both
/// encoders. Row `i` of every matrix belongs to the same sample.
#[derive(Debug, Clone)]
pub struct AlignmentBatch<'a> {
    pub skeleton: &'a Matrix,
    pub text: &'a Matrix,
    pub eps_skeleton: &'a Matrix,
    pub eps_text: &'a Matrix,
}

/// Twin VAEs over skeleton features and fused text prototypes, tied by
/// cross-decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModule {
    pub skeleton: VaeBranch,
    pub text: VaeBranch,
    pub weights: LossWeights,
}

impl AlignmentModule {
    pub fn init<R: Rng + ?Sized>(
        skeleton_dim: usize,
        text_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        weights: LossWeights,
        rng: &mut R,
    ) -> Result<Self> {
        if latent_dim == 0 || skeleton_dim == 0 || text_dim == 0 {
            return Err(MsfError::Config("alignment dims must be positive".into()));
        }
        if weights.alpha < 0.0 || weights.beta < 0.0 {
            return Err(MsfError::Config("alpha and beta must be non-negative".into()));
        }
        let skeleton = VaeBranch::init(Modality::Skeleton, skeleton_dim, hidden, latent_dim, rng);
        let text = VaeBranch::init(Modality::Text, text_dim, hidden, latent_dim, rng);
        Ok(AlignmentModule {
            skeleton,
            text,
            weights,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.skeleton.latent_dim()
    }

    pub fn branch(&self, m: Modality) -> &VaeBranch {
        match m {
            Modality::Skeleton => &self.skeleton,
            Modality::Text => &self.text,
        }
    }

    fn branch_mut(&mut self, m: Modality) -> &mut VaeBranch {
        match m {
            Modality::Skeleton => &mut self.skeleton,
            Modality::Text => &mut self.text,
        }
    }

    pub fn zeros_like(&self) -> AlignmentModule {
        AlignmentModule {
            skeleton: self.skeleton.zeros_like(),
            text: self.text.zeros_like(),
            weights: self.weights,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Loss of the branch owning `source`: reconstruction of its own
    /// modality, β-weighted KL to the prior and α-weighted distance between
    /// the other modality's features and the other decoder applied to this
    /// branch's latent sample.
    pub fn branch_loss(&self, source: Modality, batch: &AlignmentBatch<'_>) -> Result<BranchLoss> {
        self.branch_loss_with(source, batch, self.weights)
    }

    pub fn branch_loss_with(
        &self,
        source: Modality,
        batch: &AlignmentBatch<'_>,
        weights: LossWeights,
    ) -> Result<BranchLoss> {
        self.branch_pass(source, batch, weights, None)
    }

    /// Branch loss plus its gradient, accumulated into `grad`.
    pub fn branch_loss_grad(
        &self,
        source: Modality,
        batch: &AlignmentBatch<'_>,
        weights: LossWeights,
        grad: &mut AlignmentModule,
    ) -> Result<BranchLoss> {
        self.branch_pass(source, batch, weights, Some(grad))
    }

    /// Sum of the skeleton-branch and text-branch losses.
    pub fn total_loss(&self, batch: &AlignmentBatch<'_>) -> Result<TotalLoss> {
        self.total_loss_with(batch, self.weights)
    }

    pub fn total_loss_with(&self, batch: &AlignmentBatch<'_>, weights: LossWeights) -> Result<TotalLoss> {
        let skeleton = self.branch_loss_with(Modality::Skeleton, batch, weights)?;
        let text = self.branch_loss_with(Modality::Text, batch, weights)?;
        Ok(TotalLoss {
            total: skeleton.total + text.total,
            skeleton,
            text,
        })
    }

    /// Total loss and its gradient with respect to every parameter.
    pub fn total_loss_grad(
        &self,
        batch: &AlignmentBatch<'_>,
        weights: LossWeights,
    ) -> Result<(TotalLoss, AlignmentModule)> {
        let mut grad = self.zeros_like();
        let skeleton = self.branch_loss_grad(Modality::Skeleton, batch, weights, &mut grad)?;
        let text = self.branch_loss_grad(Modality::Text, batch, weights, &mut grad)?;
        Ok((
            TotalLoss {
                total: skeleton.total + text.total,
                skeleton,
                text,
            },
            grad,
        ))
    }

    fn branch_pass(
        &self,
        source: Modality,
        batch: &AlignmentBatch<'_>,
        weights: LossWeights,
        grad: Option<&mut AlignmentModule>,
    ) -> Result<BranchLoss> {
        let (own_feat, other_feat, eps) = match source {
            Modality::Skeleton => (batch.skeleton, batch.text, batch.eps_skeleton),
            Modality::Text => (batch.text, batch.skeleton, batch.eps_text),
        };
        let b = own_feat.rows();
        if b == 0 {
            return Err(MsfError::EmptyInput("alignment batch has no rows".into()));
        }
        if other_feat.rows() != b || eps.rows() != b {
            return Err(MsfError::Shape(format!(
                "batch rows disagree: own {b}, other {}, noise {}",
                other_feat.rows(),
                eps.rows()
            )));
        }
        let own = self.branch(source);
        let other = self.branch(source.other());
        let bf = b as f64;

        let (post, enc_cache) = own.encode_cached(own_feat)?;
        let z = post.reparameterize(eps)?;
        let (recon, rec_cache) = own.decoder.forward_cached(&z)?;
        let (cross, cross_cache) = other.decoder.forward_cached(&z)?;
        if cross.cols() != other_feat.cols() {
            return Err(MsfError::Shape(format!(
                "{} decoder emits {} features, batch has {}",
                source.other().as_str(),
                cross.cols(),
                other_feat.cols()
            )));
        }

        let recon_res = recon.sub(own_feat)?;
        let recon_term = recon_res.frobenius_sq() / bf;
        let kl_term = post.kl_per_row().iter().sum::<f64>() / bf;
        let cross_res = cross.sub(other_feat)?;
        let norms: Vec<f64> = cross_res.row_iter().map(l2_norm).collect();
        let align_term = match weights.align_norm {
            AlignNorm::L2 => norms.iter().sum::<f64>() / bf,
            AlignNorm::SquaredL2 => norms.iter().map(|n| n * n).sum::<f64>() / bf,
        };
        let total = recon_term + weights.beta * kl_term + weights.alpha * align_term;
        let loss = BranchLoss {
            total,
            parts: LossParts {
                recon: recon_term,
                kl: kl_term,
                align: align_term,
            },
        };
        if !total.is_finite() {
            return Err(MsfError::Numeric(format!(
                "{} branch loss is {total}",
                source.as_str()
            )));
        }

        let Some(grad) = grad else {
            return Ok(loss);
        };

        let d_recon = recon_res.scale(2.0 / bf);
        let mut d_cross = cross_res;
        for (r, &n) in norms.iter().enumerate() {
            let coef = match weights.align_norm {
                // subgradient 0 at an exact match
                AlignNorm::L2 if n == 0.0 => 0.0,
                AlignNorm::L2 => weights.alpha / (n * bf),
                AlignNorm::SquaredL2 => 2.0 * weights.alpha / bf,
            };
            for v in d_cross.row_mut(r) {
                *v *= coef;
            }
        }
        let dz_own = own
            .decoder
            .backward(&rec_cache, &d_recon, &mut grad.branch_mut(source).decoder)?;
        let dz_other = other.decoder.backward(
            &cross_cache,
            &d_cross,
            &mut grad.branch_mut(source.other()).decoder,
        )?;
        let dz = dz_own.add(&dz_other)?;

        let mut d_mu = dz.clone();
        let mut d_lv = dz;
        for i in 0..d_mu.as_slice().len() {
            let mu = post.mu.as_slice()[i];
            let lv = post.log_var.as_slice()[i];
            let e = eps.as_slice()[i];
            d_mu.as_mut_slice()[i] += weights.beta * mu / bf;
            let dlv = &mut d_lv.as_mut_slice()[i];
            *dlv = *dlv * e * 0.5 * (0.5 * lv).exp() + weights.beta * 0.5 * lv.exp_m1() / bf;
        }
        own.encode_backward(&enc_cache, &d_mu, &d_lv, grad.branch_mut(source))?;
        Ok(loss)
    }
}

impl Params for AlignmentModule {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.skeleton.tensors();
        t.extend(self.text.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.skeleton.tensors_mut();
        t.extend(self.text.tensors_mut());
        t
    }
}
