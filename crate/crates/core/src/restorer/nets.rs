use alloc::vec::Vec;

use crate::nn::{
    tanh_backward, upsample_nearest, upsample_nearest_backward, BnMode, ConvUnit, GenerativeNeuronLayer,
    LayerRecord, LayerSpec, Parameterized, RecordReader, UnitCache,
};
use crate::{seeded_rng, Error, Real, Result, Tensor1D};

/// Generator widths. The encoder halves the length twice; the decoder
/// restores it, so inputs must be a multiple of 4 samples long.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorArch {
    pub q: usize,
    /// Channels after the first and second encoder stage.
    pub channels: (usize, usize),
    pub res_blocks: usize,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        Self {
            q: 3,
            channels: (4, 8),
            res_blocks: 12,
        }
    }
}

const ENC_KERNELS: (usize, usize) = (7, 5);
const HEAD_KERNEL: usize = 7;
const DEC_KERNEL: usize = 3;
const RES_KERNEL: usize = 3;

/// Corrupted-to-clean (or reverse) translator with outputs in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet<T> {
    arch: GeneratorArch,
    pub encoder: [ConvUnit<T>; 2],
    /// Conv + BN; the skip is added before the tanh.
    pub body: Vec<ConvUnit<T>>,
    pub decoder: [ConvUnit<T>; 2],
    pub head: ConvUnit<T>,
}

pub struct GeneratorCache<T> {
    encoder: [UnitCache<T>; 2],
    body: Vec<(UnitCache<T>, Vec<Tensor1D<T>>)>,
    decoder: [UnitCache<T>; 2],
    head: UnitCache<T>,
}

impl<T: Real> GeneratorNet<T> {
    pub fn new(arch: &GeneratorArch, seed: u64) -> Result<Self> {
        let (c1, c2) = arch.channels;
        if c1 == 0 || c2 == 0 {
            return Err(Error::InvalidArgument("generator channel counts must be positive".into()));
        }
        let q = arch.q;
        let mut rng = seeded_rng(seed);
        let mut unit = |spec: LayerSpec, bn: bool, tanh: bool| -> Result<ConvUnit<T>> {
            Ok(ConvUnit::new(GenerativeNeuronLayer::new(spec, &mut rng)?, bn, tanh))
        };
        let encoder = [
            unit(LayerSpec::same(1, c1, ENC_KERNELS.0, q).with_stride(2), true, true)?,
            unit(LayerSpec::same(c1, c2, ENC_KERNELS.1, q).with_stride(2), true, true)?,
        ];
        let body = (0..arch.res_blocks)
            .map(|_| unit(LayerSpec::same(c2, c2, RES_KERNEL, q), true, false))
            .collect::<Result<Vec<_>>>()?;
        let decoder = [
            unit(LayerSpec::same(c2, c1, DEC_KERNEL, q), true, true)?,
            unit(LayerSpec::same(c1, c1, DEC_KERNEL, q), true, true)?,
        ];
        let head = unit(LayerSpec::same(c1, 1, HEAD_KERNEL, q), false, true)?;
        Ok(Self {
            arch: *arch,
            encoder,
            body,
            decoder,
            head,
        })
    }

    pub fn arch(&self) -> &GeneratorArch {
        &self.arch
    }

    fn check_input(xs: &[Tensor1D<T>]) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        for x in xs {
            if x.channels() != 1 || x.length() % 4 != 0 || x.length() == 0 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "generator input must be one channel with length a multiple of 4, got {:?}",
                    x.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&mut self, xs: &[Tensor1D<T>], mode: BnMode) -> Result<(Vec<Tensor1D<T>>, GeneratorCache<T>)> {
        Self::check_input(xs)?;
        let (h, e0) = self.encoder[0].forward(xs, mode)?;
        let (mut h, e1) = self.encoder[1].forward(&h, mode)?;
        let mut body = Vec::with_capacity(self.body.len());
        for unit in self.body.iter_mut() {
            let (mut out, c) = unit.forward(&h, mode)?;
            for (o, x) in out.iter_mut().zip(&h) {
                o.add_assign(x);
                o.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            }
            body.push((c, out.clone()));
            h = out;
        }
        let up: Vec<_> = h.iter().map(|t| upsample_nearest(t, 2)).collect();
        let (h, d0) = self.decoder[0].forward(&up, mode)?;
        let up: Vec<_> = h.iter().map(|t| upsample_nearest(t, 2)).collect();
        let (h, d1) = self.decoder[1].forward(&up, mode)?;
        let (mut y, head) = self.head.forward(&h, mode)?;
        let half = T::from_f64(0.5);
        for t in y.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = half * *v + half);
        }
        Ok((
            y,
            GeneratorCache {
                encoder: [e0, e1],
                body,
                decoder: [d0, d1],
                head,
            },
        ))
    }

    pub fn infer(&self, x: &Tensor1D<T>) -> Result<Tensor1D<T>> {
        Self::check_input(core::slice::from_ref(x))?;
        let h = self.encoder[0].infer(x)?;
        let mut h = self.encoder[1].infer(&h)?;
        for unit in &self.body {
            let mut out = unit.infer(&h)?;
            out.add_assign(&h);
            out.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            h = out;
        }
        let h = self.decoder[0].infer(&upsample_nearest(&h, 2))?;
        let h = self.decoder[1].infer(&upsample_nearest(&h, 2))?;
        let half = T::from_f64(0.5);
        Ok(self.head.infer(&h)?.map(|v| half * v + half))
    }

    pub fn backward(&self, cache: &GeneratorCache<T>, dys: &[Tensor1D<T>], grads: &mut Self) -> Result<Vec<Tensor1D<T>>> {
        let half = T::from_f64(0.5);
        let d: Vec<_> = dys.iter().map(|t| t.map(|v| half * v)).collect();
        let d = self.head.backward(&cache.head, &d, &mut grads.head)?;
        let d = self.decoder[1].backward(&cache.decoder[1], &d, &mut grads.decoder[1])?;
        let d: Vec<_> = d.iter().map(|t| upsample_nearest_backward(t, 2)).collect();
        let d = self.decoder[0].backward(&cache.decoder[0], &d, &mut grads.decoder[0])?;
        let mut d: Vec<_> = d.iter().map(|t| upsample_nearest_backward(t, 2)).collect();
        for ((unit, (c, out)), g) in self.body.iter().zip(&cache.body).zip(grads.body.iter_mut()).rev() {
            let dpre: Vec<_> = out.iter().zip(&d).map(|(y, dy)| tanh_backward(y, dy)).collect();
            let mut dx = unit.backward(c, &dpre, g)?;
            for (a, b) in dx.iter_mut().zip(&dpre) {
                a.add_assign(b);
            }
            d = dx;
        }
        let [g0, g1] = &mut grads.encoder;
        let d = self.encoder[1].backward(&cache.encoder[1], &d, g1)?;
        self.encoder[0].backward(&cache.encoder[0], &d, g0)
    }

    pub fn to_records(&self) -> Vec<LayerRecord> {
        let mut out = Vec::new();
        self.encoder.iter().for_each(|u| u.push_records(&mut out));
        self.body.iter().for_each(|u| u.push_records(&mut out));
        self.decoder.iter().for_each(|u| u.push_records(&mut out));
        self.head.push_records(&mut out);
        out
    }

    /// Inverse of [`to_records`](Self::to_records); the body depth is
    /// inferred from the record count.
    pub fn from_records(records: &[LayerRecord]) -> Result<Self> {
        // 2 encoder + 2 decoder units with BN (2 records each), head 1 record,
        // 2 records per residual unit.
        if records.len() < 9 || (records.len() - 9) % 2 != 0 {
            return Err(Error::Checkpoint(alloc::format!(
                "{} records do not form a generator",
                records.len()
            )));
        }
        let res_blocks = (records.len() - 9) / 2;
        let mut r = RecordReader::new(records);
        let e0 = ConvUnit::from_reader(&mut r, true, true)?;
        let e1 = ConvUnit::from_reader(&mut r, true, true)?;
        let body = (0..res_blocks)
            .map(|_| ConvUnit::from_reader(&mut r, true, false))
            .collect::<Result<Vec<_>>>()?;
        let d0 = ConvUnit::from_reader(&mut r, true, true)?;
        let d1 = ConvUnit::from_reader(&mut r, true, true)?;
        let head = ConvUnit::from_reader(&mut r, false, true)?;
        r.finish()?;
        let arch = GeneratorArch {
            q: e0.conv.spec().q,
            channels: (e0.conv.spec().out_channels, e1.conv.spec().out_channels),
            res_blocks,
        };
        let net = Self {
            arch,
            encoder: [e0, e1],
            body,
            decoder: [d0, d1],
            head,
        };
        check_same_shapes(&Self::new(&arch, 0)?.to_records(), &net.to_records(), "generator")?;
        Ok(net)
    }
}

fn check_same_shapes(a: &[LayerRecord], b: &[LayerRecord], what: &str) -> Result<()> {
    let same = a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.kind == y.kind && x.shape == y.shape && x.q == y.q && x.params.len() == y.params.len()
        });
    if same {
        Ok(())
    } else {
        Err(Error::Checkpoint(alloc::format!("layer shapes do not form a {what}")))
    }
}

impl<T: Real> Parameterized<T> for GeneratorNet<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        self.encoder.iter().for_each(|u| u.visit_params(f));
        self.body.iter().for_each(|u| u.visit_params(f));
        self.decoder.iter().for_each(|u| u.visit_params(f));
        self.head.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        self.encoder.iter_mut().for_each(|u| u.visit_params_mut(f));
        self.body.iter_mut().for_each(|u| u.visit_params_mut(f));
        self.decoder.iter_mut().for_each(|u| u.visit_params_mut(f));
        self.head.visit_params_mut(f);
    }

    fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch,
            encoder: [self.encoder[0].zeros_like(), self.encoder[1].zeros_like()],
            body: self.body.iter().map(|u| u.zeros_like()).collect(),
            decoder: [self.decoder[0].zeros_like(), self.decoder[1].zeros_like()],
            head: self.head.zeros_like(),
        }
    }
}

/// Channel counts of the six discriminator stages' outputs; the last is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscriminatorArch {
    pub q: usize,
    pub channels: [usize; 5],
}

impl Default for DiscriminatorArch {
    fn default() -> Self {
        Self {
            q: 3,
            channels: [4, 8, 8, 16, 16],
        }
    }
}

pub const DISC_LAYERS: usize = 6;

/// Six kernel-4, stride-2 stages emitting one score per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet<T> {
    arch: DiscriminatorArch,
    pub layers: Vec<ConvUnit<T>>,
}

pub struct DiscriminatorCache<T> {
    layers: Vec<UnitCache<T>>,
}

impl<T: Real> DiscriminatorNet<T> {
    pub fn new(arch: &DiscriminatorArch, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let mut chans = alloc::vec![1];
        chans.extend_from_slice(&arch.channels);
        chans.push(1);
        let layers = (0..DISC_LAYERS)
            .map(|i| {
                let spec = LayerSpec::same(chans[i], chans[i + 1], 4, arch.q).with_stride(2).with_padding(1);
                Ok(ConvUnit::new(GenerativeNeuronLayer::new(spec, &mut rng)?, false, i + 1 < DISC_LAYERS))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { arch: *arch, layers })
    }

    pub fn arch(&self) -> &DiscriminatorArch {
        &self.arch
    }

    /// Patch scores for each input. Needs no batch statistics, so `&self`.
    pub fn forward(&self, xs: &[Tensor1D<T>]) -> Result<(Vec<Tensor1D<T>>, DiscriminatorCache<T>)> {
        let mut h = xs.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for unit in &self.layers {
            let (out, c) = unit.forward_stateless(&h)?;
            caches.push(c);
            h = out;
        }
        Ok((h, DiscriminatorCache { layers: caches }))
    }

    pub fn infer(&self, x: &Tensor1D<T>) -> Result<Tensor1D<T>> {
        self.layers.iter().try_fold(x.clone(), |h, u| u.infer(&h))
    }

    /// Input gradients; parameter gradients go to `grads` when given.
    pub fn backward(
        &self,
        cache: &DiscriminatorCache<T>,
        dys: &[Tensor1D<T>],
        grads: Option<&mut Self>,
    ) -> Result<Vec<Tensor1D<T>>> {
        let mut scratch;
        let grads = match grads {
            Some(g) => g,
            None => {
                scratch = self.zeros_like();
                &mut scratch
            }
        };
        let mut d = dys.to_vec();
        for ((unit, c), g) in self.layers.iter().zip(&cache.layers).zip(grads.layers.iter_mut()).rev() {
            d = unit.backward(c, &d, g)?;
        }
        Ok(d)
    }

    pub fn to_records(&self) -> Vec<LayerRecord> {
        let mut out = Vec::new();
        self.layers.iter().for_each(|u| u.push_records(&mut out));
        out
    }

    pub fn from_records(records: &[LayerRecord]) -> Result<Self> {
        let mut r = RecordReader::new(records);
        let layers = (0..DISC_LAYERS)
            .map(|i| ConvUnit::from_reader(&mut r, false, i + 1 < DISC_LAYERS))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let arch = DiscriminatorArch {
            q: layers[0].conv.spec().q,
            channels: core::array::from_fn(|i| layers[i].conv.spec().out_channels),
        };
        let net = Self { arch, layers };
        check_same_shapes(&Self::new(&arch, 0)?.to_records(), &net.to_records(), "discriminator")?;
        Ok(net)
    }
}

impl<T: Real> Parameterized<T> for DiscriminatorNet<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        self.layers.iter().for_each(|u| u.visit_params(f));
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        self.layers.iter_mut().for_each(|u| u.visit_params_mut(f));
    }

    fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch,
            layers: self.layers.iter().map(|u| u.zeros_like()).collect(),
        }
    }
}
