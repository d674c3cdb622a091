//! Signal restoration and atrial-fibrillation classification built on
//! self-organized operational (Self-ONN) layers.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches a
//! file system or a command line lives in the companion `wppg` crate.
//!
//! Layout:
//!
//! - [`nn`]: tensors, generative-neuron layers with analytic backward
//!   passes, batch normalization, pooling and optimizers.
//! - [`sigproc`]: resampling, band-pass filtering, baseline removal,
//!   normalization and windowing.
//! - [`afnet`]: the Self-AFNet classifier, its training loop, the quality
//!   gate and stratified k-fold evaluation.
//! - [`restorer`]: the operational CycleGAN and blind restoration.
//! - [`entropy`]: approximate, sample, fuzzy and permutation entropy.
//! - [`metrics`]: confusion matrices, derived metrics, ROC and AUC.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod afnet;
pub mod entropy;
mod error;
pub mod metrics;
pub mod nn;
mod real;
pub mod restorer;
pub mod sigproc;

pub use error::{Error, Result};
pub use nn::tensor::Tensor1D;
pub use real::Real;

/// Deterministic generator used for every seeded operation in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
