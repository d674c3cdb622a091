//! JSON pipeline configuration. Every key is optional; omitted keys take
//! their defaults. Relative paths in a config file are
//! taken relative to the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wppg_core::afnet::{AfnetArch, TrainConfig};
use wppg_core::entropy::{EntropyParams, Tolerance};
use wppg_core::restorer::{CycleGanConfig, DiscriminatorArch, GeneratorArch};
use wppg_core::sigproc::{Modality, PreprocessConfig, SEGMENT_SECONDS};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub preprocess: PreprocessParams,
    pub quality_gate: GateParams,
    pub restorer: RestorerParams,
    pub classifier: ClassifierParams,
    pub entropy: EntropyConfig,
    /// Test splits to evaluate; each trains on the other split.
    pub test_splits: Vec<u8>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            preprocess: PreprocessParams::default(),
            quality_gate: GateParams::default(),
            restorer: RestorerParams::default(),
            classifier: ClassifierParams::default(),
            entropy: EntropyConfig::default(),
            test_splits: vec![1, 2],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/checkpoints`.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.json"),
            out_dir: PathBuf::from("out"),
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub window_s: f64,
    pub baseline_window_s: f64,
    pub poly_order: usize,
    pub ecg_band: (f64, f64),
    pub ppg_band: (f64, f64),
}

impl Default for PreprocessParams {
    fn default() -> Self {
        let d = PreprocessConfig::default();
        Self {
            window_s: d.window_s,
            baseline_window_s: d.baseline_window_s,
            poly_order: d.poly_order,
            ecg_band: Modality::Ecg.default_band(),
            ppg_band: Modality::Ppg.default_band(),
        }
    }
}

/// Self-AFNet training settings shared by the gate and the AF classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub q: usize,
    pub width: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub momentum: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            q: d.arch.q,
            width: d.arch.width,
            epochs: d.epochs,
            lr: d.learning_rate,
            batch: d.batch_size,
            momentum: d.momentum,
        }
    }
}

impl ClassifierParams {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch,
            epochs: self.epochs,
            learning_rate: self.lr,
            momentum: self.momentum,
            clip_norm: None,
            arch: AfnetArch::with_q_width(self.q, self.width),
            seed,
        }
    }

    fn validate(&self, what: &str) -> CliResult<()> {
        check_q(self.q, what)?;
        if self.batch < 2 {
            return Err(config_err(format!("{what}.batch must be at least 2")));
        }
        if self.width < 4 {
            return Err(config_err(format!("{what}.width must be at least 4")));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(config_err(format!("{what}.lr must be positive and momentum in [0, 1)")));
        }
        if self.epochs == 0 {
            return Err(config_err(format!("{what}.epochs must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateParams {
    /// A trained gate to use instead of training one.
    pub model_path: Option<PathBuf>,
    pub train: ClassifierParams,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            model_path: None,
            train: ClassifierParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestorerParams {
    pub lambda: f64,
    pub beta: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Generator applications at restore time; 0 skips restoration.
    pub passes: usize,
    pub q: usize,
    pub generator_channels: (usize, usize),
    pub res_blocks: usize,
    pub discriminator_channels: [usize; 5],
    pub replay: usize,
    pub clip: f64,
    /// Share of acceptable segments, by SampEn rank, put in each domain.
    pub domain_fraction: f64,
}

impl Default for RestorerParams {
    fn default() -> Self {
        let d = CycleGanConfig::default();
        Self {
            lambda: d.lambda_cyc,
            beta: d.beta_ide,
            epochs: d.epochs,
            lr: d.learning_rate,
            batch: d.batch_size,
            passes: 1,
            q: d.generator.q,
            generator_channels: d.generator.channels,
            res_blocks: d.generator.res_blocks,
            discriminator_channels: d.discriminator.channels,
            replay: d.replay_size,
            clip: d.clip_norm,
            domain_fraction: 0.25,
        }
    }
}

impl RestorerParams {
    pub fn gan_config(&self, seed: u64) -> CycleGanConfig {
        CycleGanConfig {
            lambda_cyc: self.lambda,
            beta_ide: self.beta,
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch,
            replay_size: self.replay,
            clip_norm: self.clip,
            generator: GeneratorArch {
                q: self.q,
                channels: self.generator_channels,
                res_blocks: self.res_blocks,
            },
            discriminator: DiscriminatorArch {
                q: self.q,
                channels: self.discriminator_channels,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub m: usize,
    pub r: f64,
    /// When set, `r` is an absolute distance instead of a multiple of the SD.
    pub r_absolute: bool,
    pub fuzzy_power: i32,
    pub perm_order: usize,
    pub normalize_perm: bool,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        let d = EntropyParams::default();
        let (r, r_absolute) = match d.r {
            Tolerance::RelativeSd(k) => (k, false),
            Tolerance::Absolute(r) => (r, true),
        };
        Self {
            m: d.m,
            r,
            r_absolute,
            fuzzy_power: d.fuzzy_power,
            perm_order: d.perm_order,
            normalize_perm: d.normalize_perm,
        }
    }
}

impl EntropyConfig {
    pub fn params(&self) -> EntropyParams {
        EntropyParams {
            m: self.m,
            r: if self.r_absolute {
                Tolerance::Absolute(self.r)
            } else {
                Tolerance::RelativeSd(self.r)
            },
            fuzzy_power: self.fuzzy_power,
            perm_order: self.perm_order,
            normalize_perm: self.normalize_perm,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_q(q: usize, what: &str) -> CliResult<()> {
    if [1, 3, 5, 7].contains(&q) {
        Ok(())
    } else {
        Err(config_err(format!("{what}.q must be 1, 3, 5 or 7, got {q}")))
    }
}

impl PipelineConfig {
    /// Parses a config file. Unknown keys and bad values are config errors.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`, the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.manifest);
        fix(&mut self.paths.out_dir);
        if let Some(p) = self.paths.checkpoint_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.quality_gate.model_path.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let p = &self.preprocess;
        if (p.window_s - SEGMENT_SECONDS).abs() > 1e-9 {
            return Err(config_err(format!("preprocess.window_s must be {SEGMENT_SECONDS}")));
        }
        if !(p.baseline_window_s > 0.0) {
            return Err(config_err("preprocess.baseline_window_s must be positive"));
        }
        for (name, (lo, hi)) in [("ecg_band", p.ecg_band), ("ppg_band", p.ppg_band)] {
            if !(lo > 0.0 && lo < hi) {
                return Err(config_err(format!("preprocess.{name} must satisfy 0 < low < high")));
            }
        }
        self.quality_gate.train.validate("quality_gate")?;
        self.classifier.validate("classifier")?;
        let r = &self.restorer;
        check_q(r.q, "restorer")?;
        if r.passes > 2 {
            return Err(config_err(format!("restorer.passes must be 0, 1 or 2, got {}", r.passes)));
        }
        if r.batch < 2 || r.epochs == 0 || !(r.lr > 0.0) || !(r.clip > 0.0) {
            return Err(config_err("restorer needs batch >= 2, epochs >= 1, lr > 0 and clip > 0"));
        }
        if !(r.lambda >= 0.0 && r.beta >= 0.0) {
            return Err(config_err("restorer.lambda and restorer.beta must be nonnegative"));
        }
        if !(r.domain_fraction > 0.0 && r.domain_fraction <= 0.5) {
            return Err(config_err("restorer.domain_fraction must be in (0, 0.5]"));
        }
        let e = &self.entropy;
        if e.m == 0 || e.perm_order < 2 || !(e.r > 0.0) {
            return Err(config_err("entropy needs m >= 1, perm_order >= 2 and r > 0"));
        }
        if self.test_splits.is_empty() || self.test_splits.iter().any(|s| ![1, 2].contains(s)) {
            return Err(config_err("test_splits must list split 1, split 2 or both"));
        }
        let mut s = self.test_splits.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.test_splits.len() {
            return Err(config_err("test_splits has duplicates"));
        }
        Ok(())
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        let p = &self.preprocess;
        PreprocessConfig {
            window_s: p.window_s,
            baseline_window_s: p.baseline_window_s,
            poly_order: p.poly_order,
            ecg_band: p.ecg_band,
            ppg_band: p.ppg_band,
            ..PreprocessConfig::default()
        }
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths
            .checkpoint_dir
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("checkpoints"))
    }

    /// Pretty JSON of every setting, defaults included.
    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
