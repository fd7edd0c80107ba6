//! Deterministic simulator of cross-silo horizontal federated learning with
//! differentially private synthetic-data augmentation for Non-IID clients,
//! plus FedAvg and FedProx baselines.
//!
//! The crate is organised bottom-up:
//!
//! * [`nn`]: tensors, the two fixed architectures, loss, gradients, SGD.
//! * [`data`]: labelled datasets, CIFAR-10 ingestion, a toy dataset,
//!   Non-IID partitioners and image resizing.
//! * [`dp`]: Gaussian-mechanism calibration, DP nearest-neighbour histograms,
//!   an evolution-style private generator and a held-out oracle generator.
//! * [`fl`]: label-count sharing, synthetic pool assembly and targeted
//!   distribution, local training, aggregation and the experiment runner.
//! * [`metrics`]: confusion matrices, accuracy, recall and multi-seed summaries.

pub mod codec;
pub mod data;
pub mod dp;
pub mod error;
pub mod fl;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, ErrorFamily, Result};
pub use nn::{Architecture, ModelParams};
pub use tensor::Tensor;
