use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::record::{LayerKind, LayerRecord};
use super::tensor::check_channels;
use super::{Parameterized, Tensor1D};
use crate::{Error, Real, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Per-channel batch normalization over `(batch x length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

/// Normalized activations and inverse standard deviations of a train-mode pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    xhat: Vec<Tensor1D<T>>,
    inv_std: Vec<f64>,
}

impl<T: Real> BatchNorm1d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&mut self, batch: &[Tensor1D<T>], mode: BnMode) -> Result<Vec<Tensor1D<T>>> {
        match mode {
            BnMode::Train => self.forward_train(batch).map(|(y, _)| y),
            BnMode::Eval => batch.iter().map(|x| self.forward_eval(x)).collect(),
        }
    }

    /// Batch statistics; updates the running statistics.
    pub fn forward_train(&mut self, batch: &[Tensor1D<T>]) -> Result<(Vec<Tensor1D<T>>, BnCache<T>)> {
        if batch.len() < 2 {
            return Err(Error::BatchTooSmall(batch.len()));
        }
        let channels = self.channels();
        let len = batch[0].length();
        for x in batch {
            check_channels("batchnorm input channels", channels, x.channels())?;
            if x.length() != len {
                return Err(Error::ShapeMismatch {
                    context: "batchnorm input length",
                    expected: len,
                    actual: x.length(),
                });
            }
        }
        let count = (batch.len() * len) as f64;
        let mut xhat: Vec<Tensor1D<T>> = batch.to_vec();
        let mut out: Vec<Tensor1D<T>> = batch.to_vec();
        let mut inv_std = vec![0.0; channels];
        for c in 0..channels {
            let mut sum = 0.0;
            for x in batch {
                sum += x.channel(c).iter().map(|v| v.as_f64()).sum::<f64>();
            }
            let mean = sum / count;
            let mut sq = 0.0;
            for x in batch {
                sq += x.channel(c).iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>();
            }
            let var = sq / count;
            let istd = 1.0 / (var + BN_EPS).sqrt();
            inv_std[c] = istd;
            let (g, b) = (self.gamma[c], self.beta[c]);
            let (mean_t, istd_t) = (T::from_f64(mean), T::from_f64(istd));
            for (xh, y) in xhat.iter_mut().zip(out.iter_mut()) {
                for (h, o) in xh.channel_mut(c).iter_mut().zip(y.channel_mut(c)) {
                    *h = (*h - mean_t) * istd_t;
                    *o = g * *h + b;
                }
            }
            let unbiased = if count > 1.0 { sq / (count - 1.0) } else { var };
            let rm = self.running_mean[c].as_f64();
            let rv = self.running_var[c].as_f64();
            self.running_mean[c] = T::from_f64((1.0 - BN_MOMENTUM) * rm + BN_MOMENTUM * mean);
            self.running_var[c] = T::from_f64((1.0 - BN_MOMENTUM) * rv + BN_MOMENTUM * unbiased);
        }
        Ok((out, BnCache { xhat, inv_std }))
    }

    pub fn forward_eval(&self, x: &Tensor1D<T>) -> Result<Tensor1D<T>> {
        check_channels("batchnorm input channels", self.channels(), x.channels())?;
        let mut y = x.clone();
        for c in 0..self.channels() {
            let mean = self.running_mean[c];
            let istd = T::from_f64(1.0 / (self.running_var[c].as_f64() + BN_EPS).sqrt());
            let (g, b) = (self.gamma[c], self.beta[c]);
            for v in y.channel_mut(c) {
                *v = g * (*v - mean) * istd + b;
            }
        }
        Ok(y)
    }

    /// Accumulates `gamma`/`beta` gradients and returns input gradients.
    pub fn backward(
        &self,
        cache: &BnCache<T>,
        upstream: &[Tensor1D<T>],
        grads: &mut BatchNorm1d<T>,
    ) -> Vec<Tensor1D<T>> {
        let channels = self.channels();
        let len = upstream[0].length();
        let count = (upstream.len() * len) as f64;
        let mut dx: Vec<Tensor1D<T>> = upstream.to_vec();
        for c in 0..channels {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for (g, xh) in upstream.iter().zip(&cache.xhat) {
                for (&gv, &h) in g.channel(c).iter().zip(xh.channel(c)) {
                    sum_dy += gv.as_f64();
                    sum_dy_xhat += gv.as_f64() * h.as_f64();
                }
            }
            grads.beta[c] += T::from_f64(sum_dy);
            grads.gamma[c] += T::from_f64(sum_dy_xhat);
            let gamma = self.gamma[c].as_f64();
            let scale = T::from_f64(gamma * cache.inv_std[c]);
            let mean_dy = T::from_f64(sum_dy / count);
            let mean_dy_xhat = T::from_f64(sum_dy_xhat / count);
            for (d, xh) in dx.iter_mut().zip(&cache.xhat) {
                for (v, &h) in d.channel_mut(c).iter_mut().zip(xh.channel(c)) {
                    *v = scale * (*v - mean_dy - h * mean_dy_xhat);
                }
            }
        }
        dx
    }

    /// Params order: gamma, beta, running mean, running var.
    pub fn to_record(&self) -> LayerRecord {
        let mut params = Vec::with_capacity(4 * self.channels());
        for buf in [&self.gamma, &self.beta, &self.running_mean, &self.running_var] {
            params.extend(buf.iter().map(|v| v.as_f64() as f32));
        }
        LayerRecord {
            kind: LayerKind::BatchNorm,
            shape: vec![self.channels() as u32],
            q: 0,
            params,
        }
    }

    pub fn from_record(rec: &LayerRecord) -> Result<Self> {
        if rec.kind != LayerKind::BatchNorm || rec.shape.len() != 1 {
            return Err(Error::Checkpoint(alloc::string::String::from("expected a batchnorm record")));
        }
        let c = rec.shape[0] as usize;
        if rec.params.len() != 4 * c {
            return Err(Error::Checkpoint(alloc::format!(
                "batchnorm block holds {} values, expected {}",
                rec.params.len(),
                4 * c
            )));
        }
        let part = |i: usize| -> Vec<T> {
            rec.params[i * c..(i + 1) * c]
                .iter()
                .map(|&v| T::from_f64(v as f64))
                .collect()
        };
        Ok(Self {
            gamma: part(0),
            beta: part(1),
            running_mean: part(2),
            running_var: part(3),
        })
    }
}

impl<T: Real> Parameterized<T> for BatchNorm1d<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        f(&self.gamma);
        f(&self.beta);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn zeros_like(&self) -> Self {
        let c = self.channels();
        Self {
            gamma: vec![T::zero(); c],
            beta: vec![T::zero(); c],
            running_mean: vec![T::zero(); c],
            running_var: vec![T::zero(); c],
        }
    }
}
