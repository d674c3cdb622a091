use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{
    adaptive_avg_pool, adaptive_avg_pool_backward, tanh_backward, BnMode, ConvUnit, GenerativeNeuronLayer,
    LayerRecord, LayerSpec, Parameterized, RecordReader, UnitCache,
};
use crate::{seeded_rng, Error, Real, Result, Tensor1D};

pub const BLOCK_COUNT: usize = 3;

/// Layer widths of a [`SelfAfnetModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AfnetArch {
    pub q: usize,
    /// Channels between blocks.
    pub width: usize,
    pub expansion: usize,
    pub hidden: usize,
    /// Per-channel length after adaptive pooling.
    pub pooled_len: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
}

impl Default for AfnetArch {
    fn default() -> Self {
        Self {
            q: 3,
            width: 16,
            expansion: 4,
            hidden: 32,
            pooled_len: 12,
            stem_kernel: 21,
            stem_stride: 20,
        }
    }
}

impl AfnetArch {
    pub fn with_q_width(q: usize, width: usize) -> Self {
        Self { q, width, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if ![1, 3, 5, 7].contains(&self.q) {
            return Err(Error::InvalidArgument(alloc::format!("q must be 1, 3, 5 or 7, got {}", self.q)));
        }
        if self.width < 4 {
            return Err(Error::InvalidArgument(alloc::format!("width must be at least 4, got {}", self.width)));
        }
        if self.expansion == 0 || self.hidden == 0 || self.pooled_len == 0 {
            return Err(Error::InvalidArgument("expansion, hidden and pooled length must be positive".into()));
        }
        if self.stem_kernel % 2 == 0 || self.stem_stride == 0 {
            return Err(Error::InvalidArgument("stem kernel must be odd and stride positive".into()));
        }
        Ok(())
    }
}

/// Pointwise expand, depthwise k3, pointwise contract, then residual and tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAfnetBlock<T> {
    pub expand: ConvUnit<T>,
    pub depthwise: ConvUnit<T>,
    /// Batch-normalized, activated only after the skip is added.
    pub contract: ConvUnit<T>,
}

pub struct BlockCache<T> {
    expand: UnitCache<T>,
    depthwise: UnitCache<T>,
    contract: UnitCache<T>,
    out: Vec<Tensor1D<T>>,
}

impl<T: Real> SelfAfnetBlock<T> {
    fn new<R: Rng>(width: usize, expansion: usize, q: usize, rng: &mut R) -> Result<Self> {
        let inner = width * expansion;
        Ok(Self {
            expand: ConvUnit::new(GenerativeNeuronLayer::new(LayerSpec::same(width, inner, 1, q), rng)?, true, true),
            depthwise: ConvUnit::new(GenerativeNeuronLayer::new(LayerSpec::depthwise(inner, 3, q), rng)?, true, true),
            contract: ConvUnit::new(GenerativeNeuronLayer::new(LayerSpec::same(inner, width, 1, q), rng)?, true, false),
        })
    }

    pub fn forward(&mut self, xs: &[Tensor1D<T>], mode: BnMode) -> Result<(Vec<Tensor1D<T>>, BlockCache<T>)> {
        let (h1, expand) = self.expand.forward(xs, mode)?;
        let (h2, depthwise) = self.depthwise.forward(&h1, mode)?;
        let (mut out, contract) = self.contract.forward(&h2, mode)?;
        for (o, x) in out.iter_mut().zip(xs) {
            o.add_assign(x);
            o.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        }
        let cache = BlockCache {
            expand,
            depthwise,
            contract,
            out: out.clone(),
        };
        Ok((out, cache))
    }

    pub fn infer(&self, x: &Tensor1D<T>) -> Result<Tensor1D<T>> {
        let h = self.expand.infer(x)?;
        let h = self.depthwise.infer(&h)?;
        let mut out = self.contract.infer(&h)?;
        out.add_assign(x);
        out.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        Ok(out)
    }

    pub fn backward(&self, cache: &BlockCache<T>, dys: &[Tensor1D<T>], grads: &mut Self) -> Result<Vec<Tensor1D<T>>> {
        let dpre: Vec<Tensor1D<T>> = cache.out.iter().zip(dys).map(|(y, d)| tanh_backward(y, d)).collect();
        let d = self.contract.backward(&cache.contract, &dpre, &mut grads.contract)?;
        let d = self.depthwise.backward(&cache.depthwise, &d, &mut grads.depthwise)?;
        let mut dx = self.expand.backward(&cache.expand, &d, &mut grads.expand)?;
        for (a, b) in dx.iter_mut().zip(&dpre) {
            a.add_assign(b);
        }
        Ok(dx)
    }
}

impl<T: Real> Parameterized<T> for SelfAfnetBlock<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        self.expand.visit_params(f);
        self.depthwise.visit_params(f);
        self.contract.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        self.expand.visit_params_mut(f);
        self.depthwise.visit_params_mut(f);
        self.contract.visit_params_mut(f);
    }

    fn zeros_like(&self) -> Self {
        Self {
            expand: self.expand.zeros_like(),
            depthwise: self.depthwise.zeros_like(),
            contract: self.contract.zeros_like(),
        }
    }
}

/// Strided stem, three residual blocks, adaptive pooling and a two-layer head.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAfnetModel<T> {
    arch: AfnetArch,
    pub stem: ConvUnit<T>,
    pub blocks: Vec<SelfAfnetBlock<T>>,
    pub fc1: ConvUnit<T>,
    pub fc2: ConvUnit<T>,
}

pub struct ModelCache<T> {
    stem: UnitCache<T>,
    blocks: Vec<BlockCache<T>>,
    block_len: usize,
    fc1: UnitCache<T>,
    fc2: UnitCache<T>,
}

/// Same as `SelfAfnetModel::new(&AfnetArch::with_q_width(q, width), seed)`.
pub fn build_model<T: Real>(q: usize, width: usize, seed: u64) -> Result<SelfAfnetModel<T>> {
    SelfAfnetModel::new(&AfnetArch::with_q_width(q, width), seed)
}

impl<T: Real> SelfAfnetModel<T> {
    pub fn new(arch: &AfnetArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seeded_rng(seed);
        let (q, w) = (arch.q, arch.width);
        let stem_spec = LayerSpec::same(1, w, arch.stem_kernel, q).with_stride(arch.stem_stride);
        let stem = ConvUnit::new(GenerativeNeuronLayer::new(stem_spec, &mut rng)?, true, true);
        let blocks = (0..BLOCK_COUNT)
            .map(|_| SelfAfnetBlock::new(w, arch.expansion, q, &mut rng))
            .collect::<Result<_>>()?;
        let fc1 = LayerSpec::same(w * arch.pooled_len, arch.hidden, 1, q);
        let fc2 = LayerSpec::same(arch.hidden, 2, 1, q);
        Ok(Self {
            arch: *arch,
            stem,
            blocks,
            fc1: ConvUnit::new(GenerativeNeuronLayer::new(fc1, &mut rng)?, false, true),
            fc2: ConvUnit::new(GenerativeNeuronLayer::new(fc2, &mut rng)?, false, false),
        })
    }

    pub fn arch(&self) -> &AfnetArch {
        &self.arch
    }

    fn flatten(&self, pooled: Tensor1D<T>) -> Result<Tensor1D<T>> {
        let n = pooled.channels() * pooled.length();
        pooled.reshape(n, 1)
    }

    /// Batch forward; returns `(z0, z1)` logits per input.
    pub fn forward(&mut self, xs: &[Tensor1D<T>], mode: BnMode) -> Result<(Vec<[T; 2]>, ModelCache<T>)> {
        if xs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (mut h, stem) = self.stem.forward(xs, mode)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in self.blocks.iter_mut() {
            let (out, c) = b.forward(&h, mode)?;
            h = out;
            blocks.push(c);
        }
        let block_len = h[0].length();
        let flat = h
            .iter()
            .map(|t| self.flatten(adaptive_avg_pool(t, self.arch.pooled_len)?))
            .collect::<Result<Vec<_>>>()?;
        let (h, fc1) = self.fc1.forward(&flat, mode)?;
        let (z, fc2) = self.fc2.forward(&h, mode)?;
        let logits = z.iter().map(|t| [t.data()[0], t.data()[1]]).collect();
        Ok((
            logits,
            ModelCache {
                stem,
                blocks,
                block_len,
                fc1,
                fc2,
            },
        ))
    }

    /// Accumulates into `grads`; returns input gradients.
    pub fn backward(&self, cache: &ModelCache<T>, dlogits: &[[T; 2]], grads: &mut Self) -> Result<Vec<Tensor1D<T>>> {
        let dz: Vec<Tensor1D<T>> = dlogits
            .iter()
            .map(|d| Tensor1D::new(2, 1, alloc::vec![d[0], d[1]]))
            .collect::<Result<_>>()?;
        let d = self.fc2.backward(&cache.fc2, &dz, &mut grads.fc2)?;
        let d = self.fc1.backward(&cache.fc1, &d, &mut grads.fc1)?;
        let mut d = d
            .into_iter()
            .map(|t| Ok(adaptive_avg_pool_backward(&t.reshape(self.arch.width, self.arch.pooled_len)?, cache.block_len)))
            .collect::<Result<Vec<_>>>()?;
        for ((b, c), g) in self.blocks.iter().zip(&cache.blocks).zip(grads.blocks.iter_mut()).rev() {
            d = b.backward(c, &d, g)?;
        }
        self.stem.backward(&cache.stem, &d, &mut grads.stem)
    }

    /// Single-input logits with running batch-norm statistics.
    pub fn infer(&self, x: &Tensor1D<T>) -> Result<[T; 2]> {
        let mut h = self.stem.infer(x)?;
        for b in &self.blocks {
            h = b.infer(&h)?;
        }
        let flat = self.flatten(adaptive_avg_pool(&h, self.arch.pooled_len)?)?;
        let z = self.fc2.infer(&self.fc1.infer(&flat)?)?;
        Ok([z.data()[0], z.data()[1]])
    }

    /// Nodal weights only, without biases or batch-norm affine parameters.
    pub fn nodal_weight_count(&self) -> usize {
        let mut n = self.stem.conv.weights.len() + self.fc1.conv.weights.len() + self.fc2.conv.weights.len();
        for b in &self.blocks {
            n += b.expand.conv.weights.len() + b.depthwise.conv.weights.len() + b.contract.conv.weights.len();
        }
        n
    }

    pub fn to_records(&self) -> Vec<LayerRecord> {
        let mut out = Vec::new();
        self.stem.push_records(&mut out);
        for b in &self.blocks {
            b.expand.push_records(&mut out);
            b.depthwise.push_records(&mut out);
            b.contract.push_records(&mut out);
        }
        self.fc1.push_records(&mut out);
        self.fc2.push_records(&mut out);
        out
    }

    /// Rebuilds a model from [`to_records`](Self::to_records) output; the
    /// architecture is read back from the layer shapes.
    pub fn from_records(records: &[LayerRecord]) -> Result<Self> {
        let mut r = RecordReader::new(records);
        let stem = ConvUnit::from_reader(&mut r, true, true)?;
        let mut blocks = Vec::with_capacity(BLOCK_COUNT);
        for _ in 0..BLOCK_COUNT {
            blocks.push(SelfAfnetBlock {
                expand: ConvUnit::from_reader(&mut r, true, true)?,
                depthwise: ConvUnit::from_reader(&mut r, true, true)?,
                contract: ConvUnit::from_reader(&mut r, true, false)?,
            });
        }
        let fc1 = ConvUnit::from_reader(&mut r, false, true)?;
        let fc2 = ConvUnit::from_reader(&mut r, false, false)?;
        r.finish()?;
        let s = *stem.conv.spec();
        let width = s.out_channels;
        let arch = AfnetArch {
            q: s.q,
            width,
            expansion: blocks[0].expand.conv.spec().out_channels / width,
            hidden: fc1.conv.spec().out_channels,
            pooled_len: fc1.conv.spec().in_channels / width,
            stem_kernel: s.kernel_size,
            stem_stride: s.stride,
        };
        arch.validate()?;
        let model = Self {
            arch,
            stem,
            blocks,
            fc1,
            fc2,
        };
        // Round-trip through a freshly built model to validate every shape.
        let reference = Self::new(&arch, 0)?;
        if reference.to_records().iter().zip(model.to_records().iter()).any(|(a, b)| {
            a.kind != b.kind || a.shape != b.shape || a.q != b.q || a.params.len() != b.params.len()
        }) {
            return Err(Error::Checkpoint("layer shapes do not form a Self-AFNet".into()));
        }
        Ok(model)
    }
}

impl<T: Real> Parameterized<T> for SelfAfnetModel<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        self.stem.visit_params(f);
        for b in &self.blocks {
            b.visit_params(f);
        }
        self.fc1.visit_params(f);
        self.fc2.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        self.stem.visit_params_mut(f);
        for b in self.blocks.iter_mut() {
            b.visit_params_mut(f);
        }
        self.fc1.visit_params_mut(f);
        self.fc2.visit_params_mut(f);
    }

    fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch,
            stem: self.stem.zeros_like(),
            blocks: self.blocks.iter().map(|b| b.zeros_like()).collect(),
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
        }
    }
}
