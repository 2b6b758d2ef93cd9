//! Learnable activation functions with analytic gradients, stochastic
//! activation-layer substitution for small CNNs, and sum-rule ensemble
//! evaluation.

pub mod activations;
pub mod builder;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod model;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
