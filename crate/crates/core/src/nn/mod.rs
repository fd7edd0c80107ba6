//! Minimal neural-network engine: a CIFAR-scale CNN and a small MLP with
//! hand-written forward and backward passes, NLL loss with an optional
//! proximal term, and plain SGD.
//!
//! Parameters and activations are `f32`; losses and gradient sums are
//! accumulated in `f64`.

mod cnn;
pub mod io;
mod kernels;
mod loss;
mod mlp;
mod ops;
mod params;

pub use loss::{nll_loss, LossConfig, LossKind};
pub use ops::{backward, forward, loss_and_gradient, sgd_step};
pub use params::{init_params, Architecture, Layer, ModelParams};
