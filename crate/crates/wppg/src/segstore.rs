//! On-disk segment sets passed between pipeline stages.
//!
//! `"WSEG1"`, u32 count, then per segment: u16 subject length, subject
//! bytes, u32 window, u8 modality, u8 label, u8 quality, u8 annotated
//! quality, u8 split, and 2500 little-endian f32 samples.

use std::path::Path;

use wppg_core::sigproc::{Label, Modality, Quality, Segment, SourceKey, SEGMENT_LEN, SEGMENT_RATE_HZ};

use crate::error::{data_err, CliError, CliResult};

const MAGIC: &[u8; 5] = b"WSEG1";

/// A segment plus the bookkeeping the pipeline carries alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSegment {
    pub segment: Segment,
    /// Evaluation split, 1 or 2.
    pub split: u8,
    /// Quality from the manifest's annotations, if any covered the window.
    pub quality_truth: Option<Quality>,
}

fn modality_code(m: Modality) -> u8 {
    match m {
        Modality::Ecg => 0,
        Modality::Ppg => 1,
    }
}

fn label_code(l: Label) -> u8 {
    match l {
        Label::NonAf => 0,
        Label::Af => 1,
        Label::Unlabeled => 2,
    }
}

fn quality_code(q: Quality) -> u8 {
    match q {
        Quality::Unassessed => 0,
        Quality::Acceptable => 1,
        Quality::Corrupted => 2,
    }
}

fn quality_from(code: u8) -> CliResult<Quality> {
    match code {
        0 => Ok(Quality::Unassessed),
        1 => Ok(Quality::Acceptable),
        2 => Ok(Quality::Corrupted),
        c => Err(data_err(format!("bad quality code {c}"))),
    }
}

pub fn encode(items: &[StoredSegment]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + items.len() * (4 * SEGMENT_LEN + 32));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(items.len() as u32).to_le_bytes());
    for it in items {
        let s = &it.segment;
        let id = s.source.subject_id.as_bytes();
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&(s.source.window as u32).to_le_bytes());
        out.push(modality_code(s.modality));
        out.push(label_code(s.label));
        out.push(quality_code(s.quality));
        out.push(it.quality_truth.map_or(0, quality_code));
        out.push(it.split);
        for v in &s.samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> CliResult<Vec<StoredSegment>> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> CliResult<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| data_err(format!("segment file truncated at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    if take(5)? != MAGIC {
        return Err(data_err("not a segment file"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let n = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let subject_id = String::from_utf8(take(n)?.to_vec()).map_err(|_| data_err("subject id is not UTF-8"))?;
        let window = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let head = take(5)?;
        let modality = match head[0] {
            0 => Modality::Ecg,
            1 => Modality::Ppg,
            c => return Err(data_err(format!("bad modality code {c}"))),
        };
        let label = match head[1] {
            0 => Label::NonAf,
            1 => Label::Af,
            2 => Label::Unlabeled,
            c => return Err(data_err(format!("bad label code {c}"))),
        };
        let quality = quality_from(head[2])?;
        let quality_truth = match head[3] {
            0 => None,
            c => Some(quality_from(c)?),
        };
        let split = head[4];
        let samples = take(4 * SEGMENT_LEN)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push(StoredSegment {
            segment: Segment {
                samples,
                sample_rate_hz: SEGMENT_RATE_HZ,
                modality,
                label,
                quality,
                source: SourceKey { subject_id, window },
            },
            split,
            quality_truth,
        });
    }
    if pos != bytes.len() {
        return Err(data_err(format!("{} trailing bytes in segment file", bytes.len() - pos)));
    }
    Ok(out)
}

pub fn write(path: &Path, items: &[StoredSegment]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, encode(items)).map_err(CliError::io(path))
}

/// Reads a stage output; a missing file names the stage that writes it.
pub fn read(path: &Path, stage: &'static str) -> CliResult<Vec<StoredSegment>> {
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            stage,
        });
    }
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Data(m) => data_err(format!("{}: {m}", path.display())),
        other => other,
    })
}
