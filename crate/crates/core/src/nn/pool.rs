use alloc::vec::Vec;

use super::Tensor1D;
use crate::{Error, Real, Result};

/// Bin `i` of `target` covers `[floor(i*L/T), floor((i+1)*L/T))`.
fn bin_bounds(length: usize, target: usize, i: usize) -> (usize, usize) {
    (i * length / target, (i + 1) * length / target)
}

/// Averages contiguous, non-overlapping spans down to `target_length` bins.
pub fn adaptive_avg_pool<T: Real>(input: &Tensor1D<T>, target_length: usize) -> Result<Tensor1D<T>> {
    let len = input.length();
    if target_length == 0 || target_length > len {
        return Err(Error::InvalidArgument(alloc::format!(
            "pool target {target_length} must be in 1..={len}"
        )));
    }
    let mut data = Vec::with_capacity(input.channels() * target_length);
    for c in 0..input.channels() {
        let x = input.channel(c);
        for i in 0..target_length {
            let (lo, hi) = bin_bounds(len, target_length, i);
            let sum: f64 = x[lo..hi].iter().map(|v| v.as_f64()).sum();
            data.push(T::from_f64(sum / (hi - lo) as f64));
        }
    }
    Tensor1D::new(input.channels(), target_length, data)
}

pub fn adaptive_avg_pool_backward<T: Real>(upstream: &Tensor1D<T>, input_length: usize) -> Tensor1D<T> {
    let target = upstream.length();
    let mut grad = Tensor1D::zeros(upstream.channels(), input_length);
    for c in 0..upstream.channels() {
        let g = upstream.channel(c);
        let out = grad.channel_mut(c);
        for (i, &gi) in g.iter().enumerate() {
            let (lo, hi) = bin_bounds(input_length, target, i);
            let share = gi / T::from_usize(hi - lo);
            out[lo..hi].fill(share);
        }
    }
    grad
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_nearest<T: Real>(input: &Tensor1D<T>, factor: usize) -> Tensor1D<T> {
    let len = input.length();
    Tensor1D::from_fn(input.channels(), len * factor, |c, t| input.get(c, t / factor))
}

pub fn upsample_nearest_backward<T: Real>(upstream: &Tensor1D<T>, factor: usize) -> Tensor1D<T> {
    let len = upstream.length() / factor;
    Tensor1D::from_fn(upstream.channels(), len, |c, t| {
        upstream.channel(c)[t * factor..(t + 1) * factor].iter().copied().sum()
    })
}
