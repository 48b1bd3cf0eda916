//! Matrix-free Hessian spectra, subspace similarity and instrumented
//! full-batch gradient descent for small ReLU networks.

pub mod config;
pub mod datasets;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mlp;
pub mod spectral;
pub mod trainer;

pub use config::{RunConfig, Seeds};
pub use error::{Error, Result};
