//! Model-free symbol detection for pH-keyed molecular communication.
//!
//! The crate simulates a pH channel driven by acid/base injections, frames the
//! received traces into symbol windows and compares a threshold detector with
//! small neural detectors trained on the simulated data.

pub mod baseline;
pub mod channel;
pub mod error;
pub mod eval;
pub mod framing;
pub mod nn;
pub mod numerics;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = numerics::Tensor<f64>;
pub type Tensor32 = numerics::Tensor<f32>;
pub type Network64 = nn::Network<f64>;
pub type Network32 = nn::Network<f32>;
