//! Physics-informed and classical solvers for simply supported
//! Euler-Bernoulli beam vibration.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod fdm;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod problems;
pub mod sampler;
pub mod sann;

pub use error::{Error, Result};
