//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod criteria;
pub mod oracles;

use rand::Rng;
use wppg_core::nn::Parameterized;
use wppg_core::{SeededRng, Tensor1D};

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-3;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn random_tensor(rng: &mut SeededRng, channels: usize, length: usize) -> Tensor1D<f64> {
    Tensor1D::from_fn(channels, length, |_, _| rng.gen_range(-1.0..1.0))
}

/// Weighted sum `sum(r * y)`; its gradient with respect to `y` is `r`.
pub fn probe(ys: &[Tensor1D<f64>], rs: &[Tensor1D<f64>]) -> f64 {
    ys.iter()
        .zip(rs)
        .map(|(y, r)| y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

pub fn nudge<M: Parameterized<f64>>(model: &mut M, index: usize, delta: f64) {
    let mut offset = 0;
    model.visit_params_mut(&mut |p| {
        if index >= offset && index < offset + p.len() {
            p[index - offset] += delta;
        }
        offset += p.len();
    });
}

/// Worst relative error between `grads` and central differences of `loss`
/// over the parameters listed in `indices`.
pub fn audit_params<M: Parameterized<f64> + Clone>(
    model: &M,
    grads: &M,
    indices: impl IntoIterator<Item = usize>,
    loss: impl FnMut(&M) -> f64,
) -> f64 {
    audit_params_with_step(model, grads, indices, FD_STEP, loss)
}

pub fn audit_params_with_step<M: Parameterized<f64> + Clone>(
    model: &M,
    grads: &M,
    indices: impl IntoIterator<Item = usize>,
    step: f64,
    mut loss: impl FnMut(&M) -> f64,
) -> f64 {
    let analytic = grads.flat_params();
    let mut worst = 0.0f64;
    for i in indices {
        let mut plus = model.clone();
        nudge(&mut plus, i, step);
        let mut minus = model.clone();
        nudge(&mut minus, i, -step);
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
        worst = worst.max(rel_err(analytic[i], numeric));
    }
    worst
}

/// Same check for the input batch.
pub fn audit_inputs(
    xs: &[Tensor1D<f64>],
    dxs: &[Tensor1D<f64>],
    indices: impl IntoIterator<Item = (usize, usize)>,
    loss: impl FnMut(&[Tensor1D<f64>]) -> f64,
) -> f64 {
    audit_inputs_with_step(xs, dxs, indices, FD_STEP, loss)
}

pub fn audit_inputs_with_step(
    xs: &[Tensor1D<f64>],
    dxs: &[Tensor1D<f64>],
    indices: impl IntoIterator<Item = (usize, usize)>,
    step: f64,
    mut loss: impl FnMut(&[Tensor1D<f64>]) -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    for (b, i) in indices {
        let mut plus = xs.to_vec();
        plus[b].data_mut()[i] += step;
        let mut minus = xs.to_vec();
        minus[b].data_mut()[i] -= step;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
        worst = worst.max(rel_err(dxs[b].data()[i], numeric));
    }
    worst
}

/// Every `(batch, flat index)` pair of a batch.
pub fn all_positions(xs: &[Tensor1D<f64>]) -> Vec<(usize, usize)> {
    xs.iter()
        .enumerate()
        .flat_map(|(b, x)| (0..x.data().len()).map(move |i| (b, i)))
        .collect()
}

/// Up to `n` distinct random indices below `len`, always including 0 and `len - 1`.
pub fn sample_indices(rng: &mut SeededRng, len: usize, n: usize) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    let mut idx = rand::seq::index::sample(rng, len, n).into_vec();
    idx.push(0);
    idx.push(len - 1);
    idx.sort_unstable();
    idx.dedup();
    idx
}
