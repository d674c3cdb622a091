use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Layer type tag used by checkpoint manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    SelfOnn = 1,
    BatchNorm = 2,
}

impl LayerKind {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Self::SelfOnn),
            2 => Ok(Self::BatchNorm),
            other => Err(Error::Checkpoint(format!("unknown layer tag {other}"))),
        }
    }
}

/// One layer's manifest entry and its parameter block.
///
/// `params` holds every stored value (trainable or not) as `f32`, in the
/// order the layer documents.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub kind: LayerKind,
    pub shape: Vec<u32>,
    pub q: u32,
    pub params: Vec<f32>,
}

impl LayerRecord {
    /// Number of stored values implied by `kind`, `shape` and `q` alone.
    pub fn expected_len(kind: LayerKind, shape: &[u32], q: u32) -> Result<usize> {
        match (kind, shape) {
            (LayerKind::BatchNorm, [c]) => Ok(4 * *c as usize),
            (LayerKind::SelfOnn, [out, inp, k, stride, pad, depthwise]) => {
                let spec = super::LayerSpec {
                    out_channels: *out as usize,
                    in_channels: *inp as usize,
                    kernel_size: *k as usize,
                    stride: *stride as usize,
                    padding: *pad as usize,
                    depthwise: *depthwise != 0,
                    q: q as usize,
                };
                spec.validate()?;
                Ok(spec.weight_len() + spec.out_channels)
            }
            _ => Err(Error::Checkpoint(format!("{kind:?} record with {} shape ints", shape.len()))),
        }
    }
}

/// Sequential reader over a record list, used by `from_records` builders.
pub struct RecordReader<'a> {
    records: &'a [LayerRecord],
    pos: usize,
}

impl<'a> RecordReader<'a> {
    pub fn new(records: &'a [LayerRecord]) -> Self {
        Self { records, pos: 0 }
    }

    pub fn next(&mut self, kind: LayerKind) -> Result<&'a LayerRecord> {
        let rec = self
            .records
            .get(self.pos)
            .ok_or_else(|| Error::Checkpoint(format!("missing layer {}", self.pos)))?;
        if rec.kind != kind {
            return Err(Error::Checkpoint(format!(
                "layer {} is {:?}, expected {:?}",
                self.pos, rec.kind, kind
            )));
        }
        self.pos += 1;
        Ok(rec)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.records.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing layers",
                self.records.len() - self.pos
            )));
        }
        Ok(())
    }
}
