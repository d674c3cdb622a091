use alloc::vec::Vec;

use super::batchnorm::BnCache;
use super::record::{LayerRecord, RecordReader};
use super::{tanh_backward, BatchNorm1d, BnMode, GenerativeNeuronLayer, LayerKind, Parameterized, SelfOnnCache, Tensor1D};
use crate::{Real, Result};

/// A generative-neuron layer optionally followed by batch norm and tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvUnit<T> {
    pub conv: GenerativeNeuronLayer<T>,
    pub bn: Option<BatchNorm1d<T>>,
    pub tanh: bool,
}

#[derive(Debug, Clone)]
pub struct UnitCache<T> {
    conv: Vec<SelfOnnCache<T>>,
    bn: Option<BnCache<T>>,
    /// Post-activation outputs, kept only when `tanh` is set.
    activated: Vec<Tensor1D<T>>,
}

impl<T: Real> ConvUnit<T> {
    pub fn new(conv: GenerativeNeuronLayer<T>, batch_norm: bool, tanh: bool) -> Self {
        let bn = batch_norm.then(|| BatchNorm1d::new(conv.spec().out_channels));
        Self { conv, bn, tanh }
    }

    pub fn forward(&mut self, xs: &[Tensor1D<T>], mode: BnMode) -> Result<(Vec<Tensor1D<T>>, UnitCache<T>)> {
        let mut conv_caches = Vec::with_capacity(xs.len());
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            let (y, c) = self.conv.forward_cached(x)?;
            ys.push(y);
            conv_caches.push(c);
        }
        let mut bn_cache = None;
        if let Some(bn) = self.bn.as_mut() {
            ys = match mode {
                BnMode::Train => {
                    let (out, cache) = bn.forward_train(&ys)?;
                    bn_cache = Some(cache);
                    out
                }
                BnMode::Eval => ys.iter().map(|y| bn.forward_eval(y)).collect::<Result<_>>()?,
            };
        }
        let mut activated = Vec::new();
        if self.tanh {
            for y in ys.iter_mut() {
                y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            }
            activated = ys.clone();
        }
        Ok((
            ys,
            UnitCache {
                conv: conv_caches,
                bn: bn_cache,
                activated,
            },
        ))
    }

    /// Cached forward for units without batch norm, which hold no state
    /// that a forward pass could update.
    pub fn forward_stateless(&self, xs: &[Tensor1D<T>]) -> Result<(Vec<Tensor1D<T>>, UnitCache<T>)> {
        if self.bn.is_some() {
            return Err(crate::Error::InvalidArgument(
                "stateless forward requires a unit without batch norm".into(),
            ));
        }
        let mut conv = Vec::with_capacity(xs.len());
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            let (mut y, c) = self.conv.forward_cached(x)?;
            if self.tanh {
                y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            }
            ys.push(y);
            conv.push(c);
        }
        let activated = if self.tanh { ys.clone() } else { Vec::new() };
        Ok((ys, UnitCache { conv, bn: None, activated }))
    }

    /// Single-input inference with running statistics.
    pub fn infer(&self, x: &Tensor1D<T>) -> Result<Tensor1D<T>> {
        let mut y = self.conv.forward(x)?;
        if let Some(bn) = &self.bn {
            y = bn.forward_eval(&y)?;
        }
        if self.tanh {
            y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
        }
        Ok(y)
    }

    pub fn backward(&self, cache: &UnitCache<T>, dys: &[Tensor1D<T>], grads: &mut Self) -> Result<Vec<Tensor1D<T>>> {
        let mut d: Vec<Tensor1D<T>> = if self.tanh {
            cache
                .activated
                .iter()
                .zip(dys)
                .map(|(y, dy)| tanh_backward(y, dy))
                .collect()
        } else {
            dys.to_vec()
        };
        if let (Some(bn), Some(bc)) = (&self.bn, &cache.bn) {
            let gbn = grads.bn.as_mut().expect("gradient container mirrors the unit");
            d = bn.backward(bc, &d, gbn);
        }
        d.iter()
            .zip(&cache.conv)
            .map(|(dy, cc)| self.conv.backward(cc, dy, &mut grads.conv))
            .collect()
    }

    pub fn push_records(&self, out: &mut Vec<LayerRecord>) {
        out.push(self.conv.to_record());
        if let Some(bn) = &self.bn {
            out.push(bn.to_record());
        }
    }

    /// Reads a conv record and, when `batch_norm` is set, the following BN record.
    pub fn from_reader(reader: &mut RecordReader<'_>, batch_norm: bool, tanh: bool) -> Result<Self> {
        let conv = GenerativeNeuronLayer::from_record(reader.next(LayerKind::SelfOnn)?)?;
        let bn = if batch_norm {
            let bn = BatchNorm1d::from_record(reader.next(LayerKind::BatchNorm)?)?;
            crate::nn::tensor::check_channels("batchnorm record channels", conv.spec().out_channels, bn.channels())?;
            Some(bn)
        } else {
            None
        };
        Ok(Self { conv, bn, tanh })
    }
}

impl<T: Real> Parameterized<T> for ConvUnit<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a [T])) {
        self.conv.visit_params(f);
        if let Some(bn) = &self.bn {
            bn.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        self.conv.visit_params_mut(f);
        if let Some(bn) = self.bn.as_mut() {
            bn.visit_params_mut(f);
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            conv: self.conv.zeros_like(),
            bn: self.bn.as_ref().map(|b| b.zeros_like()),
            tanh: self.tanh,
        }
    }
}
