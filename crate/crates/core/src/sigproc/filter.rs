use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b: [b0 / a0, b1 / a0, b2 / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    /// Bilinear-transformed `1 / (s^2 + s/Q + 1)` with the corner prewarped.
    pub fn lowpass(fs: f64, cutoff: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let k = 1.0 - cos;
        Self::from_raw(k / 2.0, k, k / 2.0, 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    pub fn highpass(fs: f64, cutoff: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let k = 1.0 + cos;
        Self::from_raw(k / 2.0, -k, k / 2.0, 1.0 + alpha, -2.0 * cos, 1.0 - alpha)
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input `x0` produce a constant output.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let g = self.dc_gain();
        [(g - self.b[0]) * x0, (self.b[2] - self.a[1] * g) * x0]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let xi = *v;
            let y = b0 * xi + z[0];
            z[0] = b1 * xi - a1 * y + z[1];
            z[1] = b2 * xi - a2 * y;
            *v = y;
        }
    }
}

/// Butterworth pole-pair quality factors for an even `order`.
fn butterworth_qs(order: usize) -> impl Iterator<Item = f64> {
    (1..=order / 2).map(move |k| {
        let theta = (2 * k - 1) as f64 * PI / (2 * order) as f64;
        1.0 / (2.0 * theta.cos())
    })
}

/// Cascade of an order-`n` Butterworth high-pass and an order-`n` low-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthBandpass {
    pub sections: Vec<Biquad>,
}

impl ButterworthBandpass {
    pub fn design(fs: f64, low_hz: f64, high_hz: f64, order: usize) -> Result<Self> {
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) || fs.is_nan() {
            return Err(Error::InvalidBand { low_hz, high_hz, fs });
        }
        if order == 0 || order % 2 != 0 {
            return Err(Error::InvalidArgument(alloc::format!("filter order {order} must be even")));
        }
        let mut sections = Vec::with_capacity(order);
        sections.extend(butterworth_qs(order).map(|q| Biquad::highpass(fs, low_hz, q)));
        sections.extend(butterworth_qs(order).map(|q| Biquad::lowpass(fs, high_hz, q)));
        Ok(Self { sections })
    }

    /// Causal single pass, starting from the steady state of `x[0]`.
    pub fn filter(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let mut level = x0;
        for s in &self.sections {
            let z = s.steady_state(level);
            s.run(x, z);
            level *= s.dc_gain();
        }
    }

    /// Forward-backward (zero-phase) filtering with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
        self.filter(&mut ext);
        ext.reverse();
        self.filter(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// 4th-order Butterworth band-pass applied forward and backward.
pub fn bandpass_filter(signal: &[f64], fs: f64, low_hz: f64, high_hz: f64) -> Result<Vec<f64>> {
    Ok(ButterworthBandpass::design(fs, low_hz, high_hz, 4)?.filtfilt(signal))
}
