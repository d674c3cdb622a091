use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Centered moving minimum (edges truncated). Returns `(argmin, min)` per
/// sample; ties resolve to the earliest index.
///
/// For even `window` the span is `[t - w/2, t + w/2 - 1]`.
pub fn moving_minimum(x: &[f64], window: usize) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 || window == 0 {
        return out;
    }
    let before = window / 2;
    let after = window - 1 - before;
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for t in 0..n {
        let hi = (t + after).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&b| x[b] > x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = t.saturating_sub(before);
        while dq.front().is_some_and(|&f| f < lo) {
            dq.pop_front();
        }
        let i = *dq.front().expect("window is non-empty");
        out.push((i, x[i]));
    }
    out
}

/// Least-squares polynomial coefficients (ascending powers) via Householder QR.
fn polyfit(ts: &[f64], ys: &[f64], order: usize) -> Result<Vec<f64>> {
    let rows = ts.len();
    let cols = order + 1;
    if rows < cols {
        return Err(Error::DegenerateFit { points: rows, order });
    }
    // Column-major Vandermonde.
    let mut a = vec![0.0; rows * cols];
    for (i, &t) in ts.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..cols {
            a[j * rows + i] = p;
            p *= t;
        }
    }
    let mut b = ys.to_vec();
    for j in 0..cols {
        let norm = (j..rows).map(|i| a[j * rows + i].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateFit { points: rows, order });
        }
        let alpha = if a[j * rows + j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..rows).map(|i| a[j * rows + i]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for k in j..cols {
            let col = &mut a[k * rows + j..(k + 1) * rows];
            let dot: f64 = v.iter().zip(col.iter()).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            col.iter_mut().zip(&v).for_each(|(c, &vi)| *c -= f * vi);
        }
        let dot: f64 = v.iter().zip(&b[j..]).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        b[j..].iter_mut().zip(&v).for_each(|(c, &vi)| *c -= f * vi);
    }
    let mut coef = vec![0.0; cols];
    for j in (0..cols).rev() {
        let r_jj = a[j * rows + j];
        if r_jj.abs() < 1e-300 {
            return Err(Error::DegenerateFit { points: rows, order });
        }
        let s: f64 = (j + 1..cols).map(|k| a[k * rows + j] * coef[k]).sum();
        coef[j] = (b[j] - s) / r_jj;
    }
    Ok(coef)
}

fn polyval(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Removes a polynomial baseline fitted through the moving-minimum points.
///
/// Each distinct minimum location contributes one point `(t, x[t])`; time
/// is mapped to `[-1, 1]` before fitting.
pub fn baseline_correct(signal: &[f64], fs: f64, window_s: f64, poly_order: usize) -> Result<Vec<f64>> {
    if poly_order < 1 {
        return Err(Error::InvalidArgument("polynomial order must be at least 1".into()));
    }
    let window = (window_s * fs).round();
    if !(window >= 3.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "baseline window of {window} samples is below 3"
        )));
    }
    let n = signal.len();
    let minima = moving_minimum(signal, window as usize);
    let mut idx: Vec<usize> = minima.iter().map(|&(i, _)| i).collect();
    idx.sort_unstable();
    idx.dedup();
    let scale = if n > 1 { 2.0 / (n - 1) as f64 } else { 0.0 };
    let to_t = |i: usize| i as f64 * scale - 1.0;
    let ts: Vec<f64> = idx.iter().map(|&i| to_t(i)).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| signal[i]).collect();
    let coef = polyfit(&ts, &ys, poly_order)?;
    Ok(signal
        .iter()
        .enumerate()
        .map(|(i, &v)| v - polyval(&coef, to_t(i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_min_truncates_edges() {
        let x = [3.0, 1.0, 2.0, 0.5, 4.0];
        let m: Vec<f64> = moving_minimum(&x, 3).iter().map(|p| p.1).collect();
        assert_eq!(m, vec![1.0, 1.0, 0.5, 0.5, 0.5]);
        let ties = moving_minimum(&[1.0, 1.0, 1.0], 3);
        assert_eq!(ties.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 0, 1]);
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 / 49.0 * 2.0 - 1.0).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 1.0 - 2.0 * t + 0.5 * t * t * t).collect();
        let c = polyfit(&ts, &ys, 3).unwrap();
        for (a, b) in c.iter().zip([1.0, -2.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_points_is_degenerate() {
        assert_eq!(
            polyfit(&[0.0, 1.0], &[0.0, 1.0], 6).unwrap_err(),
            Error::DegenerateFit { points: 2, order: 6 }
        );
    }

    #[test]
    fn zero_signal_stays_zero() {
        let y = baseline_correct(&[0.0; 2500], 250.0, 1.0, 6).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_tiny_window() {
        assert!(baseline_correct(&[0.0; 100], 250.0, 0.004, 6).is_err());
        assert!(baseline_correct(&[0.0; 100], 250.0, 1.0, 0).is_err());
    }
}
