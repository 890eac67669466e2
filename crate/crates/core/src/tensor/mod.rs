//! Dense-network substrate: matrices, dense layers, losses, Adam and a
//! finite-difference gradient checker.
//!
//! Every composite loss elsewhere in the crate has a hand-written backward
//! pass that is validated with [`grad_check`].

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{central_difference, grad_check, GradCheckOptions};
pub use layer::{linear_forward, Activation, DenseLayer, LayerCache, Mlp, Params};
pub use loss::{argmax, entropy, softmax, softmax_row, softmax_xent};
pub use matrix::{dot, l2_norm, Matrix};
