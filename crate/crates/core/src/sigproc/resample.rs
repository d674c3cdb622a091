use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::RawRecording;
use crate::{Error, Result};

const HALF_TAPS: usize = 64;
const MAX_FACTOR: u64 = 8;

/// Ingestion only accepts these native rates.
pub const SUPPORTED_RATES_HZ: [f64; 3] = [125.0, 250.0, 500.0];

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer up/down factors `(L, M)` with `to/from = L/M`.
fn ratio(from_hz: f64, to_hz: f64) -> Result<(usize, usize)> {
    let err = Error::UnsupportedRatio { from_hz, to_hz };
    if !(from_hz > 0.0 && to_hz > 0.0) {
        return Err(err);
    }
    let (f, t) = (from_hz.round(), to_hz.round());
    if (f - from_hz).abs() > 1e-9 || (t - to_hz).abs() > 1e-9 {
        return Err(err);
    }
    let (f, t) = (f as u64, t as u64);
    let g = gcd(f, t);
    let (up, down) = (t / g, f / g);
    if up > MAX_FACTOR || down > MAX_FACTOR {
        return Err(err);
    }
    Ok((up as usize, down as usize))
}

/// Blackman-windowed sinc with cutoff `fc` (cycles/sample) and DC gain `gain`.
fn lowpass_taps(fc: f64, gain: f64) -> Vec<f64> {
    let n = 2 * HALF_TAPS + 1;
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let m = i as f64 - HALF_TAPS as f64;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            let w = 0.42 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
                + 0.08 * (4.0 * PI * i as f64 / (n - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v *= gain / sum);
    h
}

/// Rational resampling by zero insertion, windowed-sinc low-pass and
/// decimation. The cutoff is 0.45 of the lower rate's Nyquist frequency.
pub fn resample_signal(x: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>> {
    let (up, down) = ratio(from_hz, to_hz)?;
    if up == 1 && down == 1 {
        return Ok(x.to_vec());
    }
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let nyquist = from_hz.min(to_hz) / 2.0;
    let fc = 0.45 * nyquist / (from_hz * up as f64);
    let taps = lowpass_taps(fc, up as f64);

    // Reflect-pad the input so the filter sees no step at the edges.
    let pad = (HALF_TAPS / up + 2).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| x[n - 1 - i]));

    let mut stuffed = vec![0.0; ext.len() * up];
    for (i, &v) in ext.iter().enumerate() {
        stuffed[i * up] = v;
    }
    let out_len = (n * up + down - 1) / down;
    let offset = pad * up;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let centre = offset + j * down;
        let mut acc = 0.0;
        for (k, &h) in taps.iter().enumerate() {
            let idx = centre as isize + k as isize - HALF_TAPS as isize;
            if idx >= 0 && (idx as usize) < stuffed.len() {
                acc += h * stuffed[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn resample(rec: &RawRecording, target_hz: f64) -> Result<RawRecording> {
    let x: Vec<f64> = rec.samples.iter().map(|&v| v as f64).collect();
    let y = resample_signal(&x, rec.sample_rate_hz, target_hz)?;
    Ok(RawRecording {
        samples: y.iter().map(|&v| v as f32).collect(),
        sample_rate_hz: target_hz,
        modality: rec.modality,
        subject_id: rec.subject_id.clone(),
        start_time: rec.start_time,
    })
}
