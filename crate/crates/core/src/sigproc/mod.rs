//! Preprocessing from raw recordings to normalized 2500-sample segments.
//!
//! The default chain is resample → band-pass → window → baseline removal →
//! min-max normalization. Baseline fitting and normalization act per
//! segment.

mod baseline;
mod filter;
mod resample;

use alloc::string::String;
use alloc::vec::Vec;

pub use baseline::{baseline_correct, moving_minimum};
pub use filter::{bandpass_filter, Biquad, ButterworthBandpass};
pub use resample::{resample, resample_signal, SUPPORTED_RATES_HZ};

use crate::{Error, Result};

/// Target rate of every segment.
pub const SEGMENT_RATE_HZ: f64 = 250.0;
/// 10 s at 250 Hz.
pub const SEGMENT_LEN: usize = 2500;
pub const SEGMENT_SECONDS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Ecg,
    Ppg,
}

impl Modality {
    /// Band-pass corners in Hz.
    pub fn default_band(self) -> (f64, f64) {
        match self {
            Modality::Ecg => (0.05, 100.0),
            Modality::Ppg => (0.5, 25.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ecg => "ECG",
            Modality::Ppg => "PPG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Af,
    NonAf,
    Unlabeled,
}

impl Label {
    /// Class index for the AF task: NonAF = 0, AF = 1.
    pub fn class_index(self) -> Option<usize> {
        match self {
            Label::NonAf => Some(0),
            Label::Af => Some(1),
            Label::Unlabeled => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quality {
    Unassessed,
    Acceptable,
    Corrupted,
}

/// Identifies a window within a subject's recording.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceKey {
    pub subject_id: String,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub samples: Vec<f32>,
    pub sample_rate_hz: f64,
    pub modality: Modality,
    pub subject_id: String,
    /// Offset of the first sample, in seconds.
    pub start_time: f64,
}

impl RawRecording {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f32>,
    pub sample_rate_hz: f64,
    pub modality: Modality,
    pub label: Label,
    pub quality: Quality,
    pub source: SourceKey,
}

impl Segment {
    /// An unlabeled, unassessed segment; checks the length.
    pub fn new(samples: Vec<f32>, modality: Modality, source: SourceKey) -> Result<Self> {
        if samples.len() != SEGMENT_LEN {
            return Err(Error::ShapeMismatch {
                context: "segment length",
                expected: SEGMENT_LEN,
                actual: samples.len(),
            });
        }
        Ok(Self {
            samples,
            sample_rate_hz: SEGMENT_RATE_HZ,
            modality,
            label: Label::Unlabeled,
            quality: Quality::Unassessed,
            source,
        })
    }
}

/// Z-score then min-max to `[0, 1]`; constant input maps to 0.5.
pub fn normalize(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let var = signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = num_traits::Float::sqrt(var);
    if !(std > 0.0) {
        return alloc::vec![0.5; n];
    }
    let z: Vec<f64> = signal.iter().map(|v| (v - mean) / std).collect();
    let (lo, hi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return alloc::vec![0.5; n];
    }
    z.iter().map(|v| (v - lo) / range).collect()
}

/// Non-overlapping windows of `window_s` seconds; the remainder is dropped.
///
/// The recording must already be at [`SEGMENT_RATE_HZ`] when the default
/// 10 s window is used.
pub fn segment_split(rec: &RawRecording, window_s: f64) -> Result<Vec<Segment>> {
    let win = libm_round(window_s * rec.sample_rate_hz);
    if win == 0 {
        return Err(Error::InvalidArgument(alloc::format!("window of {window_s} s is empty")));
    }
    if win != SEGMENT_LEN || (rec.sample_rate_hz - SEGMENT_RATE_HZ).abs() > 1e-9 {
        return Err(Error::InvalidArgument(alloc::format!(
            "segments are {SEGMENT_LEN} samples at {SEGMENT_RATE_HZ} Hz; got {win} samples at {} Hz",
            rec.sample_rate_hz
        )));
    }
    Ok(rec
        .samples
        .chunks_exact(win)
        .enumerate()
        .map(|(window, chunk)| Segment {
            samples: chunk.to_vec(),
            sample_rate_hz: rec.sample_rate_hz,
            modality: rec.modality,
            label: Label::Unlabeled,
            quality: Quality::Unassessed,
            source: SourceKey {
                subject_id: rec.subject_id.clone(),
                window,
            },
        })
        .collect())
}

fn libm_round(v: f64) -> usize {
    let r = num_traits::Float::round(v);
    if r <= 0.0 {
        0
    } else {
        r as usize
    }
}

/// Tunables of [`preprocess_recording`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub target_hz: f64,
    pub window_s: f64,
    /// Moving-minimum window for baseline estimation.
    pub baseline_window_s: f64,
    pub poly_order: usize,
    pub ecg_band: (f64, f64),
    pub ppg_band: (f64, f64),
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_hz: SEGMENT_RATE_HZ,
            window_s: SEGMENT_SECONDS,
            baseline_window_s: 1.0,
            poly_order: 6,
            ecg_band: Modality::Ecg.default_band(),
            ppg_band: Modality::Ppg.default_band(),
        }
    }
}

impl PreprocessConfig {
    pub fn band(&self, modality: Modality) -> (f64, f64) {
        match modality {
            Modality::Ecg => self.ecg_band,
            Modality::Ppg => self.ppg_band,
        }
    }
}

/// Full chain for one recording: resample, band-pass, split, then per
/// segment baseline removal and normalization.
pub fn preprocess_recording(rec: &RawRecording, cfg: &PreprocessConfig) -> Result<Vec<Segment>> {
    let resampled = resample(rec, cfg.target_hz)?;
    let (lo, hi) = cfg.band(rec.modality);
    let x: Vec<f64> = resampled.samples.iter().map(|&v| v as f64).collect();
    let filtered = if x.len() > 1 {
        bandpass_filter(&x, resampled.sample_rate_hz, lo, hi)?
    } else {
        x
    };
    let filtered_rec = RawRecording {
        samples: filtered.iter().map(|&v| v as f32).collect(),
        ..resampled
    };
    let mut segments = segment_split(&filtered_rec, cfg.window_s)?;
    for seg in segments.iter_mut() {
        let s: Vec<f64> = seg.samples.iter().map(|&v| v as f64).collect();
        let corrected = baseline_correct(&s, seg.sample_rate_hz, cfg.baseline_window_s, cfg.poly_order)?;
        seg.samples = normalize(&corrected).into_iter().map(|v| v as f32).collect();
    }
    Ok(segments)
}
