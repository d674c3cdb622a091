//! Dataset manifests and signal files.
//!
//! A manifest is JSON:
//!
//! ```json
//! {
//!   "recordings": [{"path": "s01_ppg.f32", "subject_id": "s01", "split": 1}],
//!   "annotations": [{"subject_id": "s01", "start_s": 0, "end_s": 60, "label": "AF"}],
//!   "quality_annotations": [{"subject_id": "s01", "start_s": 0, "end_s": 20, "quality": "Corrupted"}]
//! }
//! ```
//!
//! Signal files are raw little-endian f32 with a `<file>.json` sidecar
//! holding `sample_rate_hz` and `modality`, or CSV with one sample per
//! line. Manifest entries may carry the same two keys instead of, or as
//! well as, a sidecar; when both are present they must agree. Relative
//! paths resolve against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wppg_core::sigproc::{Label, Modality, Quality, RawRecording, SUPPORTED_RATES_HZ};

use crate::error::{data_err, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModalityTag {
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "PPG")]
    Ppg,
}

impl From<ModalityTag> for Modality {
    fn from(m: ModalityTag) -> Self {
        match m {
            ModalityTag::Ecg => Modality::Ecg,
            ModalityTag::Ppg => Modality::Ppg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhythmLabel {
    #[serde(rename = "AF")]
    Af,
    #[serde(rename = "NonAF")]
    NonAf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualityLabel {
    Acceptable,
    Corrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingEntry {
    pub path: PathBuf,
    pub subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<ModalityTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    #[serde(default)]
    pub start_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub subject_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: RhythmLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityAnnotation {
    pub subject_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub quality: QualityLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub recordings: Vec<RecordingEntry>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub quality_annotations: Vec<QualityAnnotation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    sample_rate_hz: f64,
    modality: ModalityTag,
}

/// A manifest after validation: every recording has an absolute path, a
/// known rate and modality, a split and a sample count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDataset {
    pub recordings: Vec<ResolvedRecording>,
    pub annotations: Vec<Annotation>,
    pub quality_annotations: Vec<QualityAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRecording {
    pub path: PathBuf,
    pub subject_id: String,
    pub modality: ModalityTag,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
    pub split: u8,
    pub samples: usize,
}

impl ResolvedRecording {
    pub fn load(&self) -> CliResult<RawRecording> {
        let samples = read_samples(&self.path)?;
        if samples.len() != self.samples {
            return Err(data_err(format!(
                "{}: {} samples, ingest recorded {}; rerun `wppg ingest`",
                self.path.display(),
                samples.len(),
                self.samples
            )));
        }
        Ok(RawRecording {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            modality: self.modality.into(),
            subject_id: self.subject_id.clone(),
            start_time: self.start_time_s,
        })
    }
}

/// Reads a signal file by extension: `.csv` as text, anything else as
/// little-endian f32.
pub fn read_samples(path: &Path) -> CliResult<Vec<f32>> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = String::from_utf8(bytes).map_err(|_| data_err(format!("{}: not UTF-8 text", path.display())))?;
        return parse_csv(&text).map_err(|(line, msg)| data_err(format!("{}:{line}: {msg}", path.display())));
    }
    if bytes.len() % 4 != 0 {
        return Err(data_err(format!(
            "{}: {} bytes is not a whole number of f32 samples",
            path.display(),
            bytes.len()
        )));
    }
    let samples: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(data_err(format!("{}: sample {i} is not finite", path.display())));
    }
    Ok(samples)
}

/// One sample per line; blank lines and `#` comments are skipped. Errors
/// carry the 1-based line number.
pub fn parse_csv(text: &str) -> Result<Vec<f32>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f32 = t.parse().map_err(|_| (i + 1, format!("cannot parse {t:?} as a sample")))?;
        if !v.is_finite() {
            return Err((i + 1, format!("sample {t:?} is not finite")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn resolve_entry(entry: &RecordingEntry, base: &Path) -> CliResult<(PathBuf, ModalityTag, f64, usize)> {
    let path = base.join(&entry.path);
    if !path.exists() {
        return Err(data_err(format!("recording {} does not exist", path.display())));
    }
    let side = sidecar_path(&path);
    let sidecar: Option<Sidecar> = if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(CliError::io(&side))?;
        Some(serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", side.display())))?)
    } else {
        None
    };
    let pick = |what: &str, a: Option<String>, b: Option<String>| -> CliResult<String> {
        match (a, b) {
            (Some(a), Some(b)) if a != b => Err(data_err(format!(
                "{}: manifest says {what} {a}, sidecar says {b}",
                path.display()
            ))),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(data_err(format!("{}: unknown {what}", path.display()))),
        }
    };
    let rate_s = pick(
        "sample rate",
        entry.sample_rate_hz.map(|r| r.to_string()),
        sidecar.as_ref().map(|s| s.sample_rate_hz.to_string()),
    )?;
    let rate: f64 = rate_s.parse().expect("formatted from an f64");
    if !SUPPORTED_RATES_HZ.contains(&rate) {
        return Err(data_err(format!(
            "{}: unknown sample rate {rate} Hz (supported: {SUPPORTED_RATES_HZ:?})",
            path.display()
        )));
    }
    let modality = match (entry.modality, sidecar.as_ref().map(|s| s.modality)) {
        (Some(a), Some(b)) if a != b => {
            return Err(data_err(format!(
                "{}: manifest says modality {a:?}, sidecar says {b:?}",
                path.display()
            )))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(data_err(format!("{}: unknown modality", path.display()))),
    };
    let samples = read_samples(&path)?.len();
    Ok((path, modality, rate, samples))
}

fn check_intervals<'a>(
    what: &str,
    known: &BTreeSet<&str>,
    items: impl Iterator<Item = (&'a str, f64, f64)>,
) -> CliResult<()> {
    let mut by_subject: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, (subject, start, end)) in items.enumerate() {
        if !known.contains(subject) {
            return Err(data_err(format!("{what} {i} refers to unknown subject {subject:?}")));
        }
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(data_err(format!("{what} {i} has an empty or invalid interval {start}..{end}")));
        }
        by_subject.entry(subject).or_default().push((start, end));
    }
    for (subject, mut iv) in by_subject {
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = iv.windows(2).find(|w| w[1].0 < w[0].1) {
            return Err(data_err(format!(
                "{what}s for {subject:?} overlap: {}..{} and {}..{}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}

/// Validates a manifest and resolves every recording.
///
/// Subjects without an explicit split are dealt to splits 1 and 2 in
/// sorted subject order.
pub fn resolve(manifest: &DatasetManifest, base: &Path) -> CliResult<ResolvedDataset> {
    let mut splits: BTreeMap<&str, Option<u8>> = BTreeMap::new();
    for e in &manifest.recordings {
        if let Some(s) = e.split {
            if ![1, 2].contains(&s) {
                return Err(data_err(format!("{}: split must be 1 or 2, got {s}", e.path.display())));
            }
        }
        match splits.get(e.subject_id.as_str()) {
            Some(prev) if e.split.is_some() && prev.is_some() && *prev != e.split => {
                return Err(data_err(format!("subject {:?} is assigned to both splits", e.subject_id)));
            }
            Some(Some(_)) => {}
            _ => {
                splits.insert(&e.subject_id, e.split);
            }
        }
        if !e.start_time_s.is_finite() || e.start_time_s < 0.0 {
            return Err(data_err(format!("{}: start_time_s must be >= 0", e.path.display())));
        }
    }
    let assigned: BTreeMap<&str, u8> = splits
        .iter()
        .enumerate()
        .map(|(i, (s, split))| (*s, split.unwrap_or(if i % 2 == 0 { 1 } else { 2 })))
        .collect();
    let known: BTreeSet<&str> = assigned.keys().copied().collect();
    check_intervals(
        "annotation",
        &known,
        manifest.annotations.iter().map(|a| (a.subject_id.as_str(), a.start_s, a.end_s)),
    )?;
    check_intervals(
        "quality annotation",
        &known,
        manifest
            .quality_annotations
            .iter()
            .map(|a| (a.subject_id.as_str(), a.start_s, a.end_s)),
    )?;
    let recordings = manifest
        .recordings
        .iter()
        .map(|e| {
            let (path, modality, sample_rate_hz, samples) = resolve_entry(e, base)?;
            Ok(ResolvedRecording {
                path,
                subject_id: e.subject_id.clone(),
                modality,
                sample_rate_hz,
                start_time_s: e.start_time_s,
                split: assigned[e.subject_id.as_str()],
                samples,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ResolvedDataset {
        recordings,
        annotations: manifest.annotations.clone(),
        quality_annotations: manifest.quality_annotations.clone(),
    })
}

pub fn load_manifest(path: &Path) -> CliResult<ResolvedDataset> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    resolve(&manifest, path.parent().unwrap_or(Path::new(".")))
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Label of the window `[t0, t1)`: whichever annotation kind covers at
/// least half of it, else unlabeled.
pub fn window_label(annotations: &[Annotation], subject: &str, t0: f64, t1: f64) -> Label {
    let (mut af, mut non) = (0.0, 0.0);
    for a in annotations.iter().filter(|a| a.subject_id == subject) {
        let o = overlap((t0, t1), (a.start_s, a.end_s));
        match a.label {
            RhythmLabel::Af => af += o,
            RhythmLabel::NonAf => non += o,
        }
    }
    let half = 0.5 * (t1 - t0);
    if af >= half {
        Label::Af
    } else if non >= half {
        Label::NonAf
    } else {
        Label::Unlabeled
    }
}

/// Same 50% rule for quality annotations.
pub fn window_quality(annotations: &[QualityAnnotation], subject: &str, t0: f64, t1: f64) -> Option<Quality> {
    let (mut ok, mut bad) = (0.0, 0.0);
    for a in annotations.iter().filter(|a| a.subject_id == subject) {
        let o = overlap((t0, t1), (a.start_s, a.end_s));
        match a.quality {
            QualityLabel::Acceptable => ok += o,
            QualityLabel::Corrupted => bad += o,
        }
    }
    let half = 0.5 * (t1 - t0);
    if bad >= half {
        Some(Quality::Corrupted)
    } else if ok >= half {
        Some(Quality::Acceptable)
    } else {
        None
    }
}
