//! Random numbers, tensors and the finite-difference oracle.

pub mod finite_diff;
pub mod rng;
pub mod tensor;

pub use finite_diff::{finite_diff_gradient, relative_error};
pub use rng::{seed_stream, PrngState};
pub use tensor::Tensor;
