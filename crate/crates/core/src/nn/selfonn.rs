//! Generative-neuron (Self-ONN) 1D layers.
//!
//! Each connection applies a learnable truncated Maclaurin series to its
//! input sample, `w1*x + w2*x^2 + ... + wq*x^q`, and the pool operator sums
//! over input channels and kernel taps. The constant term lives in the
//! bias. With `q = 1` the layer is an ordinary 1D convolution.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use super::record::{LayerKind, LayerRecord};
use super::tensor::check_channels;
use super::{Parameterized, Tensor1D};
use crate::{Error, Real, Result};

/// Static description of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub q: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    /// One group per input channel; requires `out_channels == in_channels`.
    pub depthwise: bool,
}

impl LayerSpec {
    /// Stride-1 layer with "same" padding.
    pub fn same(in_channels: usize, out_channels: usize, kernel_size: usize, q: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            q,
            kernel_size,
            stride: 1,
            padding: kernel_size / 2,
            depthwise: false,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn depthwise(channels: usize, kernel_size: usize, q: usize) -> Self {
        Self {
            depthwise: true,
            ..Self::same(channels, channels, kernel_size, q)
        }
    }

    /// Input channels seen by one output channel.
    #[inline]
    pub fn group_in(&self) -> usize {
        if self.depthwise {
            1
        } else {
            self.in_channels
        }
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.group_in() * self.q * self.kernel_size
    }

    pub fn output_length(&self, length: usize) -> Result<usize> {
        let padded = length + 2 * self.padding;
        if padded < self.kernel_size {
            return Err(Error::ShapeMismatch {
                context: "padded input length vs kernel size",
                expected: self.kernel_size,
                actual: padded,
            });
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(alloc::string::String::from(msg)));
        if self.q == 0 {
            return bad("q must be at least 1");
        }
        // Even kernels are allowed: the strided discriminator stages use 4.
        if self.kernel_size == 0 {
            return bad("kernel size must be positive");
        }
        if self.stride == 0 {
            return bad("stride must be positive");
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive");
        }
        if self.depthwise && self.in_channels != self.out_channels {
            return bad("depthwise layers keep the channel count");
        }
        Ok(())
    }
}

/// Dot product with eight independent f64 accumulators, so the loop
/// vectorizes and the summation order is fixed.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut lanes = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += x[k].as_f64() * y[k].as_f64();
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x.as_f64() * y.as_f64();
    }
    T::from_f64(lanes.iter().sum::<f64>() + tail)
}

/// Weights `(out_channels, group_in, q, kernel_size)` and bias `(out_channels,)`.
///
/// Weight element `(m, c, k, t)` multiplies the `(k+1)`-th power of the input
/// at tap `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeNeuronLayer<T> {
    spec: LayerSpec,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients share the layer layout.
pub type GradientSet<T> = GenerativeNeuronLayer<T>;

/// Zero-padded input powers `x^1..x^q` of one forward pass.
#[derive(Debug, Clone)]
pub struct SelfOnnCache<T> {
    powers: Vec<T>,
    input_length: usize,
    output_length: usize,
}

impl<T: Real> GenerativeNeuronLayer<T> {
    /// Uniform init in `[-s, s]`, `s = 1/sqrt(fan_in * q)`; zero bias.
    pub fn new<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.group_in() * spec.kernel_size * spec.q;
        let s = 1.0 / (fan_in as f64).sqrt();
        let weights = (0..spec.weight_len())
            .map(|_| T::from_f64(rng.gen_range(-s..=s)))
            .collect();
        Ok(Self {
            spec,
            weights,
            bias: vec![T::zero(); spec.out_channels],
        })
    }

    pub fn from_parts(spec: LayerSpec, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.weight_len() {
            return Err(Error::ShapeMismatch {
                context: "weight buffer",
                expected: spec.weight_len(),
                actual: weights.len(),
            });
        }
        if bias.len() != spec.out_channels {
            return Err(Error::ShapeMismatch {
                context: "bias buffer",
                expected: spec.out_channels,
                actual: bias.len(),
            });
        }
        Ok(Self {
            spec,
            weights,
            bias,
        })
    }

    #[inline]
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    #[inline]
    fn weight_index(&self, m: usize, c: usize, k: usize, t: usize) -> usize {
        ((m * self.spec.group_in() + c) * self.spec.q + k) * self.spec.kernel_size + t
    }

    pub fn weight(&self, m: usize, c: usize, k: usize, t: usize) -> T {
        self.weights[self.weight_index(m, c, k, t)]
    }

    pub fn forward(&self, input: &Tensor1D<T>) -> Result<Tensor1D<T>> {
        self.forward_cached(input).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, input: &Tensor1D<T>) -> Result<(Tensor1D<T>, SelfOnnCache<T>)> {
        let spec = &self.spec;
        check_channels("self-onn input channels", spec.in_channels, input.channels())?;
        let len = input.length();
        let out_len = spec.output_length(len)?;
        let padded = len + 2 * spec.padding;
        let q = spec.q;

        // powers[(c*q + k)*padded + pad + i] = x[c][i]^(k+1)
        let mut powers = vec![T::zero(); spec.in_channels * q * padded];
        for c in 0..spec.in_channels {
            let x = input.channel(c);
            let base = c * q * padded + spec.padding;
            for (i, &xi) in x.iter().enumerate() {
                let mut p = xi;
                for k in 0..q {
                    powers[base + k * padded + i] = p;
                    p *= xi;
                }
            }
        }

        let mut out = vec![T::zero(); spec.out_channels * out_len];
        let ks = spec.kernel_size;
        let stride = spec.stride;
        for m in 0..spec.out_channels {
            let o = &mut out[m * out_len..(m + 1) * out_len];
            o.fill(self.bias[m]);
            for cg in 0..spec.group_in() {
                let c = if spec.depthwise { m } else { cg };
                for k in 0..q {
                    let row = &powers[(c * q + k) * padded..(c * q + k + 1) * padded];
                    for tap in 0..ks {
                        let w = self.weights[self.weight_index(m, cg, k, tap)];
                        if stride == 1 {
                            let src = &row[tap..tap + out_len];
                            for (ot, &s) in o.iter_mut().zip(src) {
                                *ot += w * s;
                            }
                        } else {
                            for (t, ot) in o.iter_mut().enumerate() {
                                *ot += w * row[t * stride + tap];
                            }
                        }
                    }
                }
            }
        }
        let output = Tensor1D::new(spec.out_channels, out_len, out)?;
        Ok((
            output,
            SelfOnnCache {
                powers,
                input_length: len,
                output_length: out_len,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(
        &self,
        cache: &SelfOnnCache<T>,
        upstream: &Tensor1D<T>,
        grads: &mut GradientSet<T>,
    ) -> Result<Tensor1D<T>> {
        let spec = &self.spec;
        check_channels("self-onn upstream channels", spec.out_channels, upstream.channels())?;
        if upstream.length() != cache.output_length {
            return Err(Error::ShapeMismatch {
                context: "self-onn upstream length",
                expected: cache.output_length,
                actual: upstream.length(),
            });
        }
        if grads.spec != self.spec {
            return Err(Error::InvalidArgument(alloc::string::String::from(
                "gradient container built for a different layer",
            )));
        }
        let q = spec.q;
        let ks = spec.kernel_size;
        let stride = spec.stride;
        let len = cache.input_length;
        let padded = len + 2 * spec.padding;
        let out_len = cache.output_length;

        let mut dpowers = vec![T::zero(); spec.in_channels * q * padded];
        for m in 0..spec.out_channels {
            let g = upstream.channel(m);
            grads.bias[m] += g.iter().copied().sum::<T>();
            for cg in 0..spec.group_in() {
                let c = if spec.depthwise { m } else { cg };
                for k in 0..q {
                    let lo = (c * q + k) * padded;
                    let row = &cache.powers[lo..lo + padded];
                    let drow = &mut dpowers[lo..lo + padded];
                    for tap in 0..ks {
                        let wi = self.weight_index(m, cg, k, tap);
                        let w = self.weights[wi];
                        let gw = if stride == 1 {
                            let src = &row[tap..tap + out_len];
                            let dsrc = &mut drow[tap..tap + out_len];
                            for (ds, &gt) in dsrc.iter_mut().zip(g) {
                                *ds += w * gt;
                            }
                            dot(g, src)
                        } else {
                            let mut acc = 0.0f64;
                            for (t, &gt) in g.iter().enumerate() {
                                let idx = t * stride + tap;
                                acc += gt.as_f64() * row[idx].as_f64();
                                drow[idx] += w * gt;
                            }
                            T::from_f64(acc)
                        };
                        grads.weights[wi] += gw;
                    }
                }
            }
        }

        // d x^(k+1) / dx = (k+1) x^k, with x^0 = 1.
        let mut dx = vec![T::zero(); spec.in_channels * len];
        for c in 0..spec.in_channels {
            let out = &mut dx[c * len..(c + 1) * len];
            let base = c * q * padded + spec.padding;
            let d1 = &dpowers[base..base + len];
            out.copy_from_slice(d1);
            for k in 1..q {
                let coef = T::from_usize(k + 1);
                let dk = &dpowers[base + k * padded..base + k * padded + len];
                let pk = &cache.powers[base + (k - 1) * padded..base + (k - 1) * padded + len];
                for ((o, &d), &p) in out.iter_mut().zip(dk).zip(pk) {
                    *o += coef * d * p;
                }
            }
        }
        Tensor1D::new(spec.in_channels, len, dx)
    }

    /// Parameter and input gradients of one forward pass, from scratch.
    pub fn gradients(
        &self,
        input: &Tensor1D<T>,
        upstream: &Tensor1D<T>,
    ) -> Result<(GradientSet<T>, Tensor1D<T>)> {
        let (_, cache) = self.forward_cached(input)?;
        let mut grads = self.zeros_like();
        let dx = self.backward(&cache, upstream, &mut grads)?;
        Ok((grads, dx))
    }

    pub fn to_record(&self) -> LayerRecord {
        let s = &self.spec;
        let mut params = Vec::with_capacity(self.weights.len() + self.bias.len());
        params.extend(self.weights.iter().map(|v| v.as_f64() as f32));
        params.extend(self.bias.iter().map(|v| v.as_f64() as f32));
        LayerRecord {
            kind: LayerKind::SelfOnn,
            shape: alloc::vec![
                s.out_channels as u32,
                s.in_channels as u32,
                s.kernel_size as u32,
                s.stride as u32,
                s.padding as u32,
                s.depthwise as u32,
            ],
            q: s.q as u32,
            params,
        }
    }

    pub fn from_record(rec: &LayerRecord) -> Result<Self> {
        if rec.kind != LayerKind::SelfOnn || rec.shape.len() != 6 {
            return Err(Error::Checkpoint(alloc::format!(
                "expected a self-onn record, got {:?} with {} shape ints",
                rec.kind,
                rec.shape.len()
            )));
        }
        let sh = &rec.shape;
        let spec = LayerSpec {
            out_channels: sh[0] as usize,
            in_channels: sh[1] as usize,
            kernel_size: sh[2] as usize,
            stride: sh[3] as usize,
            padding: sh[4] as usize,
            depthwise: sh[5] != 0,
            q: rec.q as usize,
        };
        spec.validate()?;
        let wl = spec.weight_len();
        if rec.params.len() != wl + spec.out_channels {
            return Err(Error::Checkpoint(alloc::format!(
                "self-onn block holds {} values, expected {}",
                rec.params.len(),
                wl + spec.out_channels
            )));
        }
        let conv = |v: &f32| T::from_f64(*v as f64);
        Self::from_parts(
            spec,
            rec.params[..wl].iter().map(conv).collect(),
            rec.params[wl..].iter().map(conv).collect(),
        )
    }
}

impl<T: Real> Parameterized<T> for GenerativeNeuronLayer<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        f(&self.weights);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        f(&mut self.weights);
        f(&mut self.bias);
    }

    fn zeros_like(&self) -> Self {
        Self {
            spec: self.spec,
            weights: vec![T::zero(); self.weights.len()],
            bias: vec![T::zero(); self.bias.len()],
        }
    }
}
