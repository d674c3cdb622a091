//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "OPNN1"  u16 version
//! u16 section count
//! per section: u8 name length, name bytes, u32 layer count,
//!              per layer: u8 type tag, u8 shape length, u32 shape ints, u32 q
//! f32 parameter blocks, in manifest order
//! ```
//!
//! Block lengths follow from the manifest, so a reader can check the total
//! file size before touching any parameter.

use std::path::Path;

use wppg_core::afnet::SelfAfnetModel;
use wppg_core::nn::{LayerKind, LayerRecord};
use wppg_core::restorer::{CycleGanConfig, CycleGanState, DiscriminatorNet, GeneratorNet};

use crate::error::{data_err, CliError, CliResult};

pub const MAGIC: &[u8; 5] = b"OPNN1";
pub const VERSION: u16 = 1;

/// Named group of layer records.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub layers: Vec<LayerRecord>,
}

pub fn encode(sections: &[Section]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u16::try_from(sections.len()).map_err(|_| data_err("too many checkpoint sections"))?;
    out.extend_from_slice(&count.to_le_bytes());
    for s in sections {
        let name = s.name.as_bytes();
        let len = u8::try_from(name.len()).map_err(|_| data_err(format!("section name {:?} too long", s.name)))?;
        out.push(len);
        out.extend_from_slice(name);
        out.extend_from_slice(&(s.layers.len() as u32).to_le_bytes());
        for l in &s.layers {
            let expected = LayerRecord::expected_len(l.kind, &l.shape, l.q)?;
            if expected != l.params.len() {
                return Err(data_err(format!(
                    "layer in {:?} holds {} values, shape implies {expected}",
                    s.name,
                    l.params.len()
                )));
            }
            out.push(l.kind.tag());
            out.push(l.shape.len() as u8);
            for d in &l.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            out.extend_from_slice(&l.q.to_le_bytes());
        }
    }
    for l in sections.iter().flat_map(|s| &s.layers) {
        for v in &l.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| data_err(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> CliResult<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> CliResult<Vec<Section>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(data_err("not a model checkpoint (bad magic)"));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(data_err(format!("unsupported checkpoint version {version}")));
    }
    let mut sections = Vec::new();
    let mut lens = Vec::new();
    for _ in 0..c.u16()? {
        let n = c.u8()? as usize;
        let name = String::from_utf8(c.take(n)?.to_vec()).map_err(|_| data_err("section name is not UTF-8"))?;
        let layer_count = c.u32()?;
        let mut layers = Vec::new();
        for _ in 0..layer_count {
            let kind = LayerKind::from_tag(c.u8()?)?;
            let dims = c.u8()? as usize;
            let shape = (0..dims).map(|_| c.u32()).collect::<CliResult<Vec<_>>>()?;
            let q = c.u32()?;
            lens.push(LayerRecord::expected_len(kind, &shape, q)?);
            layers.push(LayerRecord {
                kind,
                shape,
                q,
                params: Vec::new(),
            });
        }
        sections.push(Section { name, layers });
    }
    let body: usize = lens.iter().sum::<usize>() * 4;
    if bytes.len() - c.pos != body {
        return Err(data_err(format!(
            "checkpoint is {} bytes, manifest implies {}",
            bytes.len(),
            c.pos + body
        )));
    }
    let mut lens = lens.into_iter();
    for l in sections.iter_mut().flat_map(|s| s.layers.iter_mut()) {
        let n = lens.next().unwrap();
        l.params = c.take(4 * n)?.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    }
    Ok(sections)
}

pub fn write(path: &Path, sections: &[Section]) -> CliResult<()> {
    let bytes = encode(sections)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn read(path: &Path) -> CliResult<Vec<Section>> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Data(m) => data_err(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn section<'a>(sections: &'a [Section], name: &str) -> CliResult<&'a [LayerRecord]> {
    sections
        .iter()
        .find(|s| s.name == name)
        .map(|s| s.layers.as_slice())
        .ok_or_else(|| data_err(format!("checkpoint has no {name:?} section")))
}

pub const CLASSIFIER_SECTION: &str = "afnet";
pub const RESTORER_SECTIONS: [&str; 4] = ["g_x2c", "g_c2x", "d_c", "d_x"];

pub fn save_classifier(path: &Path, model: &SelfAfnetModel<f32>) -> CliResult<()> {
    write(
        path,
        &[Section {
            name: CLASSIFIER_SECTION.into(),
            layers: model.to_records(),
        }],
    )
}

pub fn load_classifier(path: &Path) -> CliResult<SelfAfnetModel<f32>> {
    let sections = read(path)?;
    Ok(SelfAfnetModel::from_records(section(&sections, CLASSIFIER_SECTION)?)?)
}

pub fn save_restorer(path: &Path, state: &CycleGanState) -> CliResult<()> {
    let layers = [
        state.g_x2c.to_records(),
        state.g_c2x.to_records(),
        state.d_c.to_records(),
        state.d_x.to_records(),
    ];
    let sections: Vec<Section> = RESTORER_SECTIONS
        .iter()
        .zip(layers)
        .map(|(name, layers)| Section {
            name: (*name).into(),
            layers,
        })
        .collect();
    write(path, &sections)
}

/// Rebuilds the four networks; optimizer state starts fresh.
pub fn load_restorer(path: &Path, config: CycleGanConfig) -> CliResult<CycleGanState> {
    let sections = read(path)?;
    let g = |name| -> CliResult<GeneratorNet<f32>> { Ok(GeneratorNet::from_records(section(&sections, name)?)?) };
    let d = |name| -> CliResult<DiscriminatorNet<f32>> { Ok(DiscriminatorNet::from_records(section(&sections, name)?)?) };
    Ok(CycleGanState::from_networks(config, g("g_x2c")?, g("g_c2x")?, d("d_c")?, d("d_x")?)?)
}
