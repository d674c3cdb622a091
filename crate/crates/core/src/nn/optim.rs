//! SGD with momentum and bias-corrected Adam over [`Parameterized`] models.

use alloc::vec;
use alloc::vec::Vec;

use super::Parameterized;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState<T> {
    Sgd {
        learning_rate: f64,
        momentum: f64,
        velocity: Vec<Vec<T>>,
    },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        first_moment: Vec<Vec<T>>,
        second_moment: Vec<Vec<T>>,
        step_count: u64,
    },
}

impl<T: Real> OptimizerState<T> {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Result<Self> {
        check_lr(learning_rate)?;
        Ok(Self::Sgd {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    /// Adam with the usual `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn adam(learning_rate: f64) -> Result<Self> {
        check_lr(learning_rate)?;
        Ok(Self::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        })
    }

    /// Applies one update of `model` from the matching gradient container.
    pub fn step<M: Parameterized<T>>(&mut self, model: &mut M, grads: &M) {
        let mut g: Vec<&[T]> = Vec::new();
        grads.visit_params(&mut |p| g.push(p));
        let mut idx = 0;
        match self {
            Self::Sgd {
                learning_rate,
                momentum,
                velocity,
            } => {
                if velocity.is_empty() {
                    *velocity = g.iter().map(|b| vec![T::zero(); b.len()]).collect();
                }
                let (lr, mu) = (T::from_f64(*learning_rate), T::from_f64(*momentum));
                model.visit_params_mut(&mut |p| {
                    sgd_buffer(p, g[idx], &mut velocity[idx], lr, mu);
                    idx += 1;
                });
            }
            Self::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                first_moment,
                second_moment,
                step_count,
            } => {
                if first_moment.is_empty() {
                    *first_moment = g.iter().map(|b| vec![T::zero(); b.len()]).collect();
                    *second_moment = first_moment.clone();
                }
                *step_count += 1;
                let hp = AdamStep::new(*learning_rate, *beta1, *beta2, *epsilon, *step_count);
                model.visit_params_mut(&mut |p| {
                    hp.apply(p, g[idx], &mut first_moment[idx], &mut second_moment[idx]);
                    idx += 1;
                });
            }
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Self::Sgd { learning_rate, .. } | Self::Adam { learning_rate, .. } => *learning_rate,
        }
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    Ok(())
}

#[inline]
fn sgd_buffer<T: Real>(p: &mut [T], g: &[T], v: &mut [T], lr: T, mu: T) {
    for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
        *vi = mu * *vi + gi;
        *pi -= lr * *vi;
    }
}

struct AdamStep {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

impl AdamStep {
    fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, t: u64) -> Self {
        let t = t as i32;
        Self {
            lr,
            beta1,
            beta2,
            eps,
            bc1: 1.0 - libm_powi(beta1, t),
            bc2: 1.0 - libm_powi(beta2, t),
        }
    }

    #[inline]
    fn apply<T: Real>(&self, p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]) {
        for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let gf = gi.as_f64();
            let mf = self.beta1 * mi.as_f64() + (1.0 - self.beta1) * gf;
            let vf = self.beta2 * vi.as_f64() + (1.0 - self.beta2) * gf * gf;
            *mi = T::from_f64(mf);
            *vi = T::from_f64(vf);
            let mhat = mf / self.bc1;
            let vhat = vf / self.bc2;
            let upd = self.lr * mhat / (num_traits::Float::sqrt(vhat) + self.eps);
            *pi = T::from_f64(pi.as_f64() - upd);
        }
    }
}

fn libm_powi(x: f64, n: i32) -> f64 {
    num_traits::Float::powi(x, n)
}

/// Plain SGD on flat buffers; see [`OptimizerState::step`] for models.
pub fn sgd_step<T: Real>(params: &mut [T], grads: &[T], state: &mut OptimizerState<T>) -> Result<()> {
    match state {
        OptimizerState::Sgd {
            learning_rate,
            momentum,
            velocity,
        } => {
            if velocity.is_empty() {
                velocity.push(vec![T::zero(); params.len()]);
            }
            sgd_buffer(
                params,
                grads,
                &mut velocity[0],
                T::from_f64(*learning_rate),
                T::from_f64(*momentum),
            );
            Ok(())
        }
        OptimizerState::Adam { .. } => Err(Error::InvalidArgument("sgd_step needs an SGD state".into())),
    }
}

/// Adam on flat buffers.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut OptimizerState<T>) -> Result<()> {
    match state {
        OptimizerState::Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first_moment,
            second_moment,
            step_count,
        } => {
            if first_moment.is_empty() {
                first_moment.push(vec![T::zero(); params.len()]);
                second_moment.push(vec![T::zero(); params.len()]);
            }
            *step_count += 1;
            AdamStep::new(*learning_rate, *beta1, *beta2, *epsilon, *step_count).apply(
                params,
                grads,
                &mut first_moment[0],
                &mut second_moment[0],
            );
            Ok(())
        }
        OptimizerState::Sgd { .. } => Err(Error::InvalidArgument("adam_step needs an Adam state".into())),
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real, M: Parameterized<T>>(grads: &mut M, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    grads.visit_params(&mut |g| sq += g.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>());
    let norm = num_traits::Float::sqrt(sq);
    if norm > max_norm {
        let scale = T::from_f64(max_norm / norm);
        grads.visit_params_mut(&mut |g| g.iter_mut().for_each(|v| *v *= scale));
    }
    norm
}
