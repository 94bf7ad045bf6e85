//! Unbiased, variance-optimal sparsification of stochastic gradients over
//! atomic decompositions (entry-wise and singular value), the ℓq-quantizers
//! it generalizes, a wire codec with cost accounting, and a synchronous
//! parameter-server simulator.

pub mod atoms;
pub mod codec;
pub mod error;
pub mod quantizer;
pub mod sim;
pub mod sparsifier;
pub mod spectral;

pub use error::{Error, Result};
