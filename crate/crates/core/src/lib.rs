//! Generative cross-modal alignment for generalized zero-shot classification
//! on precomputed features.
//!
//! The pipeline fuses per-class semantic channels into prototypes, trains a
//! pair of VAEs that align skeleton-feature and text-feature latent spaces,
//! synthesizes latent samples for unseen classes, and classifies test samples
//! through a seen/unseen gate.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod selfcheck;
pub mod semantic;
pub mod tensor;
pub mod vae;

pub use error::{MsfError, Result};
pub use dataset::FeatureMatrix;
pub use eval::{GzslMetrics, SplitSpec};
pub use semantic::{fuse_semantics, FusedSemantics, SemanticBundle, SemanticMode};
pub use tensor::Matrix;
pub use vae::{AlignmentConfig, AlignmentModule};
