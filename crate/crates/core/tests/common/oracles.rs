//! Reference implementations written straight from the definitions, with
//! no shared code paths into the crate under test.

use std::collections::HashMap;

use rand::Rng;
use wppg_core::nn::{GenerativeNeuronLayer, LayerSpec};
use wppg_core::{SeededRng, Tensor1D};

use super::random_tensor;

/// Textbook cross-correlation with zero padding, straight from the sum.
pub fn plain_conv(spec: &LayerSpec, w: &[f64], b: &[f64], x: &Tensor1D<f64>) -> Vec<Vec<f64>> {
    let (len, k, p, s) = (x.length() as isize, spec.kernel_size, spec.padding as isize, spec.stride);
    let out_len = (x.length() + 2 * spec.padding - k) / s + 1;
    let gin = if spec.depthwise { 1 } else { spec.in_channels };
    let mut y = vec![vec![0.0; out_len]; spec.out_channels];
    for (m, row) in y.iter_mut().enumerate() {
        for (t, out) in row.iter_mut().enumerate() {
            let mut acc = b[m];
            for cg in 0..gin {
                let c = if spec.depthwise { m } else { cg };
                for tap in 0..k {
                    let i = (t * s + tap) as isize - p;
                    if (0..len).contains(&i) {
                        acc += w[(m * gin + cg) * k + tap] * x.get(c, i as usize);
                    }
                }
            }
            *out = acc;
        }
    }
    y
}

/// Gradients of `sum(r * conv(x))` by the same direct sums.
pub fn plain_conv_backward(
    spec: &LayerSpec,
    w: &[f64],
    x: &Tensor1D<f64>,
    r: &Tensor1D<f64>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (len, k, p, s) = (x.length() as isize, spec.kernel_size, spec.padding as isize, spec.stride);
    let gin = if spec.depthwise { 1 } else { spec.in_channels };
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; spec.out_channels];
    let mut gx = vec![0.0; x.data().len()];
    for m in 0..spec.out_channels {
        for t in 0..r.length() {
            let g = r.get(m, t);
            gb[m] += g;
            for cg in 0..gin {
                let c = if spec.depthwise { m } else { cg };
                for tap in 0..k {
                    let i = (t * s + tap) as isize - p;
                    if (0..len).contains(&i) {
                        let wi = (m * gin + cg) * k + tap;
                        gw[wi] += g * x.get(c, i as usize);
                        gx[c * x.length() + i as usize] += g * w[wi];
                    }
                }
            }
        }
    }
    (gw, gb, gx)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_q1_layer(rng: &mut SeededRng) -> (GenerativeNeuronLayer<f64>, Tensor1D<f64>) {
    let k = rng.gen_range(1..=9);
    let depthwise = rng.gen_bool(0.25);
    let cin = rng.gen_range(1..=6);
    let cout = if depthwise { cin } else { rng.gen_range(1..=6) };
    let mut spec = LayerSpec::same(cin, cout, k, 1);
    spec.depthwise = depthwise;
    let spec = spec.with_stride(rng.gen_range(1..=4)).with_padding(rng.gen_range(0..=k));
    let length = rng.gen_range(k..=64);
    let weights = (0..spec.weight_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bias = (0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let layer = GenerativeNeuronLayer::from_parts(spec, weights, bias).unwrap();
    let x = random_tensor(rng, cin, length).map(|v| 3.0 * v);
    (layer, x)
}

pub fn gaussian(rng: &mut SeededRng) -> f64 {
    let (u, v): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// White noise, a random walk, or coarsely quantized noise (many ties).
pub fn random_sequence(rng: &mut SeededRng, n: usize, kind: usize) -> Vec<f64> {
    match kind % 3 {
        0 => (0..n).map(|_| gaussian(rng)).collect(),
        1 => (0..n)
            .scan(0.0, |s, _| {
                *s += gaussian(rng);
                Some(*s)
            })
            .collect(),
        _ => (0..n).map(|_| rng.gen_range(0..5) as f64).collect(),
    }
}

pub fn sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn templates(x: &[f64], len: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|i| x[i..i + len].to_vec()).collect()
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn ref_apen(x: &[f64], m: usize, r: f64) -> f64 {
    let phi = |len: usize| {
        let count = x.len() - len + 1;
        let t = templates(x, len, count);
        let mut total = 0.0;
        for a in &t {
            let c = t.iter().filter(|b| chebyshev(a, b) <= r).count();
            total += (c as f64 / count as f64).ln();
        }
        total / count as f64
    };
    phi(m) - phi(m + 1)
}

pub fn ref_sampen(x: &[f64], m: usize, r: f64) -> f64 {
    let count = x.len() - m;
    let matches = |len: usize| {
        let t = templates(x, len, count);
        let mut c = 0u64;
        for i in 0..count {
            for j in 0..count {
                if i != j && chebyshev(&t[i], &t[j]) <= r {
                    c += 1;
                }
            }
        }
        c
    };
    let (b, a) = (matches(m), matches(m + 1));
    if a == 0 || b == 0 {
        f64::INFINITY
    } else {
        -(a as f64 / b as f64).ln()
    }
}

pub fn ref_fuzzyen(x: &[f64], m: usize, r: f64, n: i32) -> f64 {
    let count = x.len() - m;
    let phi = |len: usize| {
        let t: Vec<Vec<f64>> = templates(x, len, count)
            .into_iter()
            .map(|w| {
                let mean = w.iter().sum::<f64>() / len as f64;
                w.iter().map(|v| v - mean).collect()
            })
            .collect();
        let mut outer = 0.0;
        for i in 0..count {
            let mut inner = 0.0;
            for j in 0..count {
                if i != j {
                    inner += (-chebyshev(&t[i], &t[j]).powi(n) / r).exp();
                }
            }
            outer += inner / (count - 1) as f64;
        }
        outer / count as f64
    };
    phi(m).ln() - phi(m + 1).ln()
}

/// Ranks by value, ties by position; patterns are the rank vectors.
pub fn ref_permen(x: &[f64], order: usize, normalize: bool) -> f64 {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    let windows = x.len() - order + 1;
    for w in x.windows(order) {
        let ranks: Vec<usize> = (0..order)
            .map(|i| (0..order).filter(|&j| w[j] < w[i] || (w[j] == w[i] && j < i)).count())
            .collect();
        *counts.entry(ranks).or_default() += 1;
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / windows as f64;
            -p * p.ln()
        })
        .sum();
    let fact: f64 = (1..=order).map(|k| k as f64).product();
    if normalize {
        h / fact.ln()
    } else {
        h
    }
}

/// Midrank formula: `(R+ - n+(n+ + 1)/2) / (n+ n-)`.
pub fn rank_sum_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = mid;
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let r: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    (r - pos * (pos + 1.0) / 2.0) / (pos * neg)
}
