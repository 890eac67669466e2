//! Generative cross-modal alignment: two VAEs, one over skeleton features and
//! one over fused text prototypes.
//!
//! Each branch is trained on the negative ELBO of its own modality plus a
//! cross-reconstruction term: the latent sample of one branch is decoded by
//! the *other* branch's decoder and compared with the other modality's
//! features. The total objective is the sum of both branch losses. After
//! training, text prototypes of unseen classes are encoded and sampled to
//! synthesize latent training data, and skeleton features are embedded by
//! their posterior mean.

mod branch;
mod gaussian;
mod module;
mod train;

pub use branch::{Modality, VaeBranch};
pub use gaussian::{kl_to_standard_normal, reparameterize, GaussianParams, LOG_VAR_CLAMP};
pub use module::{AlignNorm, AlignmentBatch, AlignmentModule, BranchLoss, LossParts, LossWeights, TotalLoss};
pub use train::{
    embed_skeleton, embed_text, fit_alignment, standard_normal_matrix, synthesize_latents, train_alignment,
    AlignmentConfig, EpochLoss,
};

#[cfg(test)]
mod tests;
