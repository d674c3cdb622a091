//! Synthetic corpora with known ground truth.
//!
//! Pulse trains share one beat morphology: a systolic Gaussian wave with a
//! smaller, wider diastolic wave behind it. Every signal is normalized to
//! `[0, 1]` like a preprocessed segment.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use wppg_core::sigproc::{normalize, SEGMENT_LEN, SEGMENT_RATE_HZ, SEGMENT_SECONDS};
use wppg_core::{seeded_rng, SeededRng};

use crate::error::{CliError, CliResult};
use crate::ingest::{
    Annotation, DatasetManifest, ModalityTag, QualityAnnotation, QualityLabel, RecordingEntry, RhythmLabel,
};

/// Signals with class indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCorpus {
    pub signals: Vec<Vec<f32>>,
    pub classes: Vec<usize>,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn refs(&self) -> Vec<&[f32]> {
        self.signals.iter().map(|s| s.as_slice()).collect()
    }

    /// First `fraction` of each class for training, the rest for testing.
    /// Items are already shuffled at generation time.
    pub fn split(&self, fraction: f64) -> (LabeledCorpus, LabeledCorpus) {
        let (mut a, mut b) = (LabeledCorpus::default(), LabeledCorpus::default());
        for class in 0..2 {
            let idx: Vec<usize> = (0..self.len()).filter(|&i| self.classes[i] == class).collect();
            let cut = (idx.len() as f64 * fraction).round() as usize;
            for (k, &i) in idx.iter().enumerate() {
                let dst = if k < cut { &mut a } else { &mut b };
                dst.signals.push(self.signals[i].clone());
                dst.classes.push(class);
            }
        }
        (a, b)
    }
}

/// One beat, `t` seconds after its onset.
pub fn beat_shape(t: f64) -> f64 {
    let g = |mu: f64, sd: f64| (-0.5 * ((t - mu) / sd).powi(2)).exp();
    g(0.12, 0.05) + 0.45 * g(0.38, 0.09)
}

/// Sums beats at `onsets` (seconds) over `n` samples.
pub fn pulse_train(onsets: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &t0 in onsets {
        let lo = ((t0 - 0.2) * SEGMENT_RATE_HZ).floor().max(0.0) as usize;
        let hi = (((t0 + 0.9) * SEGMENT_RATE_HZ).ceil() as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            *v += beat_shape(i as f64 / SEGMENT_RATE_HZ - t0);
        }
    }
    x
}

/// Beat onsets covering `duration` seconds. Each interval is
/// `rr * (1 + d)` with `|d|` drawn uniformly from `jitter`, random sign.
pub fn beat_onsets<R: Rng>(rng: &mut R, rr: f64, jitter: (f64, f64), duration: f64) -> Vec<f64> {
    let mut t = -rng.gen_range(0.0..rr) - 1.0;
    let mut out = Vec::new();
    while t < duration + 1.0 {
        out.push(t);
        let d = if jitter.1 > jitter.0 { rng.gen_range(jitter.0..jitter.1) } else { jitter.0 };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        t += rr * (1.0 + sign * d);
    }
    out
}

fn finish(x: &[f64]) -> Vec<f32> {
    normalize(x).into_iter().map(|v| v as f32).collect()
}

fn add_noise(rng: &mut SeededRng, x: &mut [f64], sd: f64) {
    let n = Normal::new(0.0, sd).expect("positive standard deviation");
    x.iter_mut().for_each(|v| *v += n.sample(rng));
}

const DURATION: f64 = SEGMENT_LEN as f64 / SEGMENT_RATE_HZ;

/// Regular rhythm: every interval within 1.5% of the mean.
pub const REGULAR_JITTER: (f64, f64) = (0.0, 0.015);
/// Irregular rhythm: every interval deviates by 20–45%.
pub const IRREGULAR_JITTER: (f64, f64) = (0.20, 0.45);

/// A 10 s pulse train at `bpm` with the given interval jitter.
pub fn rhythm_segment(rng: &mut SeededRng, bpm: f64, jitter: (f64, f64), noise_sd: f64) -> Vec<f32> {
    let onsets = beat_onsets(rng, 60.0 / bpm, jitter, DURATION);
    let mut x = pulse_train(&onsets, SEGMENT_LEN);
    add_noise(rng, &mut x, noise_sd);
    finish(&x)
}

/// Regular (class 0) vs irregular (class 1) pulse trains, `n` segments in
/// alternating class order. Both classes draw their mean rate from the
/// same range and share beat shape and noise level.
pub fn af_corpus(n: usize, seed: u64) -> LabeledCorpus {
    let mut rng = seeded_rng(seed);
    let mut out = LabeledCorpus::default();
    for i in 0..n {
        let class = i % 2;
        let bpm = rng.gen_range(60.0..90.0);
        let jitter = if class == 1 { IRREGULAR_JITTER } else { REGULAR_JITTER };
        out.signals.push(rhythm_segment(&mut rng, bpm, jitter, 0.03));
        out.classes.push(class);
    }
    out
}

/// Acceptable pulse trains (class 0) vs white noise (class 1).
pub fn quality_corpus(n: usize, seed: u64) -> LabeledCorpus {
    let mut rng = seeded_rng(seed);
    let mut out = LabeledCorpus::default();
    for i in 0..n {
        let class = i % 2;
        let signal = if class == 0 {
            let bpm = rng.gen_range(55.0..110.0);
            let jitter = if rng.gen_bool(0.5) { REGULAR_JITTER } else { IRREGULAR_JITTER };
            rhythm_segment(&mut rng, bpm, jitter, 0.03)
        } else {
            let mut x = vec![0.0; SEGMENT_LEN];
            add_noise(&mut rng, &mut x, 1.0);
            finish(&x)
        };
        out.signals.push(signal);
        out.classes.push(class);
    }
    out
}

fn clean_raw(rng: &mut SeededRng) -> Vec<f64> {
    let bpm = rng.gen_range(60.0..90.0);
    let onsets = beat_onsets(rng, 60.0 / bpm, (0.0, 0.05), DURATION);
    let mut x = pulse_train(&onsets, SEGMENT_LEN);
    add_noise(rng, &mut x, 0.01);
    x
}

/// Baseline drift, dropouts and broadband noise on top of a clean train.
fn corrupt(rng: &mut SeededRng, x: &mut [f64]) {
    let f = rng.gen_range(0.05..0.25);
    let amp = rng.gen_range(0.4..1.0);
    let phase = rng.gen_range(0.0..core::f64::consts::TAU);
    for (i, v) in x.iter_mut().enumerate() {
        *v += amp * (core::f64::consts::TAU * f * i as f64 / SEGMENT_RATE_HZ + phase).sin();
    }
    for _ in 0..rng.gen_range(1..=3) {
        let len = rng.gen_range(50..200);
        let start = rng.gen_range(0..SEGMENT_LEN - len);
        let level = x[start];
        x[start..start + len].iter_mut().for_each(|v| *v = level);
    }
    add_noise(rng, x, 0.15);
}

/// Clean pulse trains and independently drawn corrupted ones.
pub fn restoration_corpus(n_per_domain: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let mut rng = seeded_rng(seed);
    let clean = (0..n_per_domain).map(|_| finish(&clean_raw(&mut rng))).collect();
    let corrupted = (0..n_per_domain)
        .map(|_| {
            let mut x = clean_raw(&mut rng);
            corrupt(&mut rng, &mut x);
            finish(&x)
        })
        .collect();
    (clean, corrupted)
}

/// Sums `shape(t - onset)` over onsets, evaluating each beat only on
/// `support` seconds around its onset.
fn render(onsets: &[f64], fs: f64, n: usize, support: (f64, f64), shape: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &t0 in onsets {
        let lo = ((t0 + support.0) * fs).floor().max(0.0) as usize;
        let hi = (((t0 + support.1) * fs).ceil().max(0.0) as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            *v += shape(i as f64 / fs - t0);
        }
    }
    x
}

fn gauss(t: f64, sd: f64) -> f64 {
    (-0.5 * (t / sd).powi(2)).exp()
}

/// ECG beat around an R peak at `t = 0`; `p_wave` is absent in AF.
fn ecg_beat(t: f64, p_wave: bool) -> f64 {
    let p = if p_wave { 0.12 * gauss(t + 0.16, 0.025) } else { 0.0 };
    p + gauss(t, 0.012) - 0.15 * gauss(t - 0.03, 0.01) + 0.25 * gauss(t - 0.25, 0.04)
}

/// One signal file of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalFile {
    /// Relative to the dataset directory.
    pub path: PathBuf,
    pub samples: Vec<f32>,
    pub modality: ModalityTag,
    pub sample_rate_hz: f64,
}

pub const SYNTH_PPG_HZ: f64 = 125.0;
pub const SYNTH_ECG_HZ: f64 = 500.0;
/// Windows per rhythm episode.
const EPISODE_WINDOWS: usize = 3;

/// Paired ECG and PPG recordings of `subjects` subjects, `windows` 10 s
/// windows each, with rhythm episodes and corrupted PPG windows.
///
/// Episodes alternate between AF (irregular beats, no P waves) and
/// regular rhythm. About a quarter of the PPG windows get drift, dropouts
/// and heavy noise and are annotated Corrupted; the rest are annotated
/// Acceptable. Subjects alternate between splits 1 and 2, and subject 0's
/// ECG is written as CSV.
pub fn synthetic_dataset(subjects: usize, windows: usize, seed: u64) -> (DatasetManifest, Vec<SignalFile>) {
    let mut rng = seeded_rng(seed);
    let mut manifest = DatasetManifest::default();
    let mut files = Vec::new();
    let duration = windows as f64 * SEGMENT_SECONDS;
    for subject in 0..subjects {
        let id = format!("s{subject:02}");
        let split = 1 + (subject % 2) as u8;
        let mut onsets = Vec::new();
        let mut af_beats = Vec::new();
        for (e, start) in (0..windows).step_by(EPISODE_WINDOWS).enumerate() {
            let t0 = start as f64 * SEGMENT_SECONDS;
            let t1 = ((start + EPISODE_WINDOWS).min(windows)) as f64 * SEGMENT_SECONDS;
            let af = (subject + e) % 2 == 1;
            let rr = 60.0 / rng.gen_range(60.0..90.0);
            let jitter = if af { IRREGULAR_JITTER } else { REGULAR_JITTER };
            for t in beat_onsets(&mut rng, rr, jitter, t1 - t0) {
                if (0.0..t1 - t0).contains(&t) {
                    onsets.push(t0 + t);
                    af_beats.push(af);
                }
            }
            manifest.annotations.push(Annotation {
                subject_id: id.clone(),
                start_s: t0,
                end_s: t1,
                label: if af { RhythmLabel::Af } else { RhythmLabel::NonAf },
            });
        }

        let n_ecg = (duration * SYNTH_ECG_HZ) as usize;
        let pick = |af: bool| -> Vec<f64> {
            onsets.iter().zip(&af_beats).filter(|(_, &a)| a == af).map(|(&t, _)| t).collect()
        };
        let mut ecg = render(&pick(false), SYNTH_ECG_HZ, n_ecg, (-0.3, 0.5), |t| ecg_beat(t, true));
        let irregular = render(&pick(true), SYNTH_ECG_HZ, n_ecg, (-0.3, 0.5), |t| ecg_beat(t, false));
        ecg.iter_mut().zip(irregular).for_each(|(a, b)| *a += b);
        add_noise(&mut rng, &mut ecg, 0.02);

        let n_ppg = (duration * SYNTH_PPG_HZ) as usize;
        let transit: Vec<f64> = onsets.iter().map(|t| t + 0.15).collect();
        let mut ppg = render(&transit, SYNTH_PPG_HZ, n_ppg, (-0.2, 0.9), beat_shape);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        for (i, v) in ppg.iter_mut().enumerate() {
            *v += 0.3 * (std::f64::consts::TAU * 0.1 * i as f64 / SYNTH_PPG_HZ + phase).sin();
        }
        add_noise(&mut rng, &mut ppg, 0.02);
        let per_window = (SEGMENT_SECONDS * SYNTH_PPG_HZ) as usize;
        for w in 0..windows {
            let corrupted = rng.gen_bool(0.25);
            if corrupted {
                let x = &mut ppg[w * per_window..(w + 1) * per_window];
                let f = rng.gen_range(0.2..0.6);
                let amp = rng.gen_range(1.0..2.5);
                for (i, v) in x.iter_mut().enumerate() {
                    *v += amp * (std::f64::consts::TAU * f * i as f64 / SYNTH_PPG_HZ).sin();
                }
                let len = rng.gen_range(per_window / 8..per_window / 3);
                let start = rng.gen_range(0..per_window - len);
                let level = x[start];
                x[start..start + len].iter_mut().for_each(|v| *v = level);
                add_noise(&mut rng, x, 0.8);
            }
            manifest.quality_annotations.push(QualityAnnotation {
                subject_id: id.clone(),
                start_s: w as f64 * SEGMENT_SECONDS,
                end_s: (w + 1) as f64 * SEGMENT_SECONDS,
                quality: if corrupted { QualityLabel::Corrupted } else { QualityLabel::Acceptable },
            });
        }

        let ecg_csv = subject == 0;
        for (modality, samples, fs, ext) in [
            (ModalityTag::Ecg, ecg, SYNTH_ECG_HZ, if ecg_csv { "csv" } else { "f32" }),
            (ModalityTag::Ppg, ppg, SYNTH_PPG_HZ, "f32"),
        ] {
            let path = PathBuf::from(format!("{id}_{}.{ext}", format!("{modality:?}").to_lowercase()));
            let csv = ext == "csv";
            manifest.recordings.push(RecordingEntry {
                path: path.clone(),
                subject_id: id.clone(),
                modality: csv.then_some(modality),
                sample_rate_hz: csv.then_some(fs),
                start_time_s: 0.0,
                split: Some(split),
            });
            files.push(SignalFile {
                path,
                samples: samples.iter().map(|&v| v as f32).collect(),
                modality,
                sample_rate_hz: fs,
            });
        }
    }
    (manifest, files)
}

/// Writes [`synthetic_dataset`] into `dir` and returns the manifest path.
/// Binary files get a JSON sidecar; CSV files rely on the manifest.
pub fn write_synthetic_dataset(dir: &Path, subjects: usize, windows: usize, seed: u64) -> CliResult<PathBuf> {
    let (manifest, files) = synthetic_dataset(subjects, windows, seed);
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    for f in &files {
        let path = dir.join(&f.path);
        if f.path.extension().is_some_and(|e| e == "csv") {
            let text: String = f.samples.iter().map(|v| format!("{v}\n")).collect();
            std::fs::write(&path, text).map_err(CliError::io(&path))?;
        } else {
            let bytes: Vec<u8> = f.samples.iter().flat_map(|v| v.to_le_bytes()).collect();
            std::fs::write(&path, bytes).map_err(CliError::io(&path))?;
            let side = crate::ingest::sidecar_path(&path);
            let meta = serde_json::json!({"sample_rate_hz": f.sample_rate_hz, "modality": f.modality});
            std::fs::write(&side, meta.to_string()).map_err(CliError::io(&side))?;
        }
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok(path)
}
