//! Approximate, sample, fuzzy and permutation entropy.
//!
//! All logarithms are natural. Distances between templates are Chebyshev.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::sigproc::{Segment, SourceKey};
use crate::{Error, Result};

/// How the tolerance `r` is turned into an absolute distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// `r * SD(x)`, with the population standard deviation.
    RelativeSd(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyParams {
    pub m: usize,
    pub r: Tolerance,
    pub fuzzy_power: i32,
    pub perm_order: usize,
    pub normalize_perm: bool,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self {
            m: 2,
            r: Tolerance::RelativeSd(0.1),
            fuzzy_power: 2,
            perm_order: 3,
            normalize_perm: true,
        }
    }
}

impl EntropyParams {
    /// Absolute tolerance for `x`.
    pub fn tolerance(&self, x: &[f64]) -> f64 {
        match self.r {
            Tolerance::Absolute(r) => r,
            Tolerance::RelativeSd(k) => k * std_dev(x),
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be at least 1".into()));
        }
        if x.len() < self.m + 2 {
            return Err(Error::TooShort { len: x.len(), min: self.m + 2 });
        }
        Ok(())
    }
}

fn std_dev(x: &[f64]) -> f64 {
    if x.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Chebyshev distance between `x[i..i+len]` and `x[j..j+len]`.
#[inline]
fn cheb(x: &[f64], i: usize, j: usize, len: usize) -> f64 {
    x[i..i + len]
        .iter()
        .zip(&x[j..j + len])
        .fold(0.0, |d, (a, b)| d.max((a - b).abs()))
}

/// `phi^m(r)` over the `N - m + 1` templates of length `m`, self-matches included.
fn apen_phi(x: &[f64], m: usize, r: f64) -> f64 {
    let count = x.len() - m + 1;
    let mut matches = vec![1u64; count];
    for i in 0..count {
        for j in i + 1..count {
            if cheb(x, i, j, m) <= r {
                matches[i] += 1;
                matches[j] += 1;
            }
        }
    }
    matches
        .iter()
        .map(|&c| (c as f64 / count as f64).ln())
        .sum::<f64>()
        / count as f64
}

pub fn apen(x: &[f64], p: &EntropyParams) -> Result<f64> {
    p.check_len(x)?;
    let r = p.tolerance(x);
    if !(r > 0.0) {
        return Err(Error::ZeroTolerance);
    }
    Ok(apen_phi(x, p.m, r) - apen_phi(x, p.m + 1, r))
}

/// `-ln(A/B)` over the first `N - m` templates, self-matches excluded.
///
/// Returns `f64::INFINITY` when no pair matches at either length.
pub fn sampen(x: &[f64], p: &EntropyParams) -> Result<f64> {
    p.check_len(x)?;
    let r = p.tolerance(x);
    if !(r > 0.0) {
        return Err(Error::ZeroTolerance);
    }
    let m = p.m;
    let count = x.len() - m;
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..count {
        for j in i + 1..count {
            if cheb(x, i, j, m) <= r {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    if a == 0 || b == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(-(a as f64 / b as f64).ln())
}

/// Mean-removed templates of length `len`, `count` of them.
fn demeaned(x: &[f64], len: usize, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * len);
    for i in 0..count {
        let w = &x[i..i + len];
        let mean = w.iter().sum::<f64>() / len as f64;
        out.extend(w.iter().map(|v| v - mean));
    }
    out
}

fn fuzzy_phi(x: &[f64], len: usize, count: usize, r: f64, n: i32) -> f64 {
    let t = demeaned(x, len, count);
    let mut total = 0.0;
    for i in 0..count {
        let ti = &t[i * len..(i + 1) * len];
        for j in i + 1..count {
            let tj = &t[j * len..(j + 1) * len];
            let d = ti.iter().zip(tj).fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
            total += 2.0 * membership(d, r, n);
        }
    }
    total / (count as f64 * (count - 1) as f64)
}

#[inline]
fn membership(d: f64, r: f64, n: i32) -> f64 {
    if r > 0.0 {
        (-d.powi(n) / r).exp()
    } else if d == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `ln phi^m - ln phi^(m+1)` with similarity `exp(-d^n / r)`.
///
/// A zero tolerance is taken as the limit: only identical templates are similar.
pub fn fuzzyen(x: &[f64], p: &EntropyParams) -> Result<f64> {
    p.check_len(x)?;
    let r = p.tolerance(x);
    let count = x.len() - p.m;
    let a = fuzzy_phi(x, p.m, count, r, p.fuzzy_power);
    let b = fuzzy_phi(x, p.m + 1, count, r, p.fuzzy_power);
    Ok(a.ln() - b.ln())
}

/// Lehmer code of the stable ascending argsort of `w`.
fn pattern_code(w: &[f64], idx: &mut [usize]) -> u64 {
    for (i, v) in idx.iter_mut().enumerate() {
        *v = i;
    }
    idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    let mut code = 0u64;
    for i in 0..idx.len() {
        let smaller = idx[i + 1..].iter().filter(|&&v| v < idx[i]).count() as u64;
        code = code * (idx.len() - i) as u64 + smaller;
    }
    code
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Shannon entropy of ordinal patterns of length `perm_order`.
///
/// Equal values rank by position, earlier first.
pub fn permen(x: &[f64], p: &EntropyParams) -> Result<f64> {
    let order = p.perm_order;
    if !(2..=20).contains(&order) {
        return Err(Error::InvalidArgument(alloc::format!(
            "permutation order {order} outside 2..=20"
        )));
    }
    if x.len() < order + 1 {
        return Err(Error::TooShort { len: x.len(), min: order + 1 });
    }
    let windows = x.len() - order + 1;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut idx = vec![0usize; order];
    for w in x.windows(order) {
        *counts.entry(pattern_code(w, &mut idx)).or_default() += 1;
    }
    let h = -counts
        .values()
        .map(|&c| {
            let pr = c as f64 / windows as f64;
            pr * pr.ln()
        })
        .sum::<f64>();
    let h = h.max(0.0);
    Ok(if p.normalize_perm { h / ln_factorial(order) } else { h })
}

/// Entropies of one sequence. Failed or infinite values are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EntropyValues {
    pub fuzzyen: Option<f64>,
    pub sampen: Option<f64>,
    pub apen: Option<f64>,
    pub permen: Option<f64>,
}

impl EntropyValues {
    pub fn compute(x: &[f64], p: &EntropyParams) -> Self {
        let finite = |r: Result<f64>| r.ok().filter(|v| v.is_finite());
        Self {
            fuzzyen: finite(fuzzyen(x, p)),
            sampen: finite(sampen(x, p)),
            apen: finite(apen(x, p)),
            permen: finite(permen(x, p)),
        }
    }

    /// Report column order: FuzzyEn, SampEn, ApEn, PermEn.
    pub fn columns(&self) -> [Option<f64>; 4] {
        [self.fuzzyen, self.sampen, self.apen, self.permen]
    }
}

pub const REPORT_COLUMNS: [&str; 4] = ["FuzzyEn", "SampEn", "ApEn", "PermEn"];

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub name: String,
    /// Means over the defined values, `None` when none are defined.
    pub means: [Option<f64>; 4],
    /// Per column, how many segments gave an undefined or infinite value.
    pub undefined: [usize; 4],
    pub segments: usize,
}

/// Means of each entropy over named segment sets.
///
/// Every set must cover the same source keys in the same order.
pub fn entropy_report(sets: &[(&str, &[Segment])], p: &EntropyParams) -> Result<Vec<EntropyRow>> {
    let Some((_, first)) = sets.first() else {
        return Err(Error::EmptyDomain("entropy report"));
    };
    let keys: Vec<&SourceKey> = first.iter().map(|s| &s.source).collect();
    let mut rows = Vec::with_capacity(sets.len());
    for (name, segs) in sets {
        if segs.is_empty() {
            return Err(Error::EmptyDomain("entropy report segment set"));
        }
        if segs.len() != keys.len() || segs.iter().zip(&keys).any(|(s, k)| &s.source != *k) {
            return Err(Error::InvalidArgument(alloc::format!(
                "segment set {name:?} is not aligned with {:?}",
                sets[0].0
            )));
        }
        let mut sums = [0.0f64; 4];
        let mut defined = [0usize; 4];
        for s in segs.iter() {
            let x: Vec<f64> = s.samples.iter().map(|&v| v as f64).collect();
            for (k, v) in EntropyValues::compute(&x, p).columns().into_iter().enumerate() {
                if let Some(v) = v {
                    sums[k] += v;
                    defined[k] += 1;
                }
            }
        }
        let means = core::array::from_fn(|k| (defined[k] > 0).then(|| sums[k] / defined[k] as f64));
        rows.push(EntropyRow {
            name: String::from(*name),
            means,
            undefined: core::array::from_fn(|k| segs.len() - defined[k]),
            segments: segs.len(),
        });
    }
    Ok(rows)
}
