//! Tensors, layers and optimizers.
//!
//! Every trainable structure implements [`Parameterized`]. A zeroed clone of
//! a structure (see [`Parameterized::zeros_like`]) doubles as its gradient
//! container, so parameters and gradients can be walked in lockstep.

pub mod activation;
pub mod batchnorm;
pub mod optim;
pub mod pool;
pub mod record;
pub mod selfonn;
pub mod tensor;
pub mod unit;

use alloc::vec::Vec;

pub use activation::{tanh_backward, tanh_forward};
pub use batchnorm::{BatchNorm1d, BnMode};
pub use optim::{adam_step, clip_global_norm, sgd_step, OptimizerState};
pub use pool::{adaptive_avg_pool, adaptive_avg_pool_backward, upsample_nearest, upsample_nearest_backward};
pub use record::{LayerKind, LayerRecord, RecordReader};
pub use selfonn::{GenerativeNeuronLayer, GradientSet, LayerSpec, SelfOnnCache};
pub use tensor::Tensor1D;
pub use unit::{ConvUnit, UnitCache};

use crate::Real;

/// A structure owning trainable parameter buffers.
pub trait Parameterized<T: Real> {
    /// Visits every trainable buffer in a fixed order.
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T]));

    /// Same order as [`visit_params`](Self::visit_params).
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T]));

    /// A copy with every trainable buffer set to zero.
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }

    fn zero_params(&mut self) {
        self.visit_params_mut(&mut |p| p.fill(T::zero()));
    }

    /// Flattened copy of all trainable values.
    fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(&mut |p| out.extend_from_slice(p));
        out
    }
}
