//! Self-AFNet: a shallow Self-ONN classifier used both as the signal
//! quality gate and as the AF vs non-AF detector.

mod model;

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;

pub use model::{build_model, AfnetArch, BlockCache, ModelCache, SelfAfnetBlock, SelfAfnetModel, BLOCK_COUNT};

use crate::metrics::{confusion, ConfusionMatrix};
use crate::nn::{clip_global_norm, BnMode, OptimizerState, Parameterized};
use crate::sigproc::{Quality, Segment, SEGMENT_LEN};
use crate::{seeded_rng, Error, Result, Tensor1D};

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub arch: AfnetArch,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 20,
            learning_rate: 0.25,
            momentum: 0.0,
            clip_norm: None,
            arch: AfnetArch::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn build_model(&self) -> Result<SelfAfnetModel<f32>> {
        SelfAfnetModel::new(&self.arch, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Softmax probability of class 1.
pub fn positive_score(logits: [f32; 2]) -> f64 {
    let d = logits[0] as f64 - logits[1] as f64;
    1.0 / (1.0 + d.exp())
}

/// Mean cross-entropy of a batch and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[[f32; 2]], classes: &[usize]) -> (f64, Vec<[f32; 2]>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grads = logits
        .iter()
        .zip(classes)
        .map(|(z, &c)| {
            let p1 = positive_score(*z);
            let p = [1.0 - p1, p1];
            // log-softmax computed stably
            let (a, b) = (z[c] as f64, z[1 - c] as f64);
            let m = a.max(b);
            loss += -(a - m - ((a - m).exp() + (b - m).exp()).ln());
            let mut g = [p[0] / n, p[1] / n];
            g[c] -= 1.0 / n;
            [g[0] as f32, g[1] as f32]
        })
        .collect();
    (loss / n, grads)
}

fn to_input(samples: &[f32]) -> Result<Tensor1D<f32>> {
    if samples.len() != SEGMENT_LEN {
        return Err(Error::ShapeMismatch {
            context: "classifier input length",
            expected: SEGMENT_LEN,
            actual: samples.len(),
        });
    }
    Tensor1D::from_signal(samples)
}

fn check_classes(classes: &[usize]) -> Result<()> {
    if let Some(&c) = classes.iter().find(|&&c| c > 1) {
        return Err(Error::InvalidArgument(alloc::format!("class index {c} is not binary")));
    }
    if !(classes.contains(&0) && classes.contains(&1)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Shuffled mini-batch training with cross-entropy loss.
///
/// A trailing batch of one is merged into the previous batch so batch
/// normalization always sees at least two inputs.
pub fn train(
    model: &mut SelfAfnetModel<f32>,
    signals: &[&[f32]],
    classes: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    if signals.len() != classes.len() {
        return Err(Error::ShapeMismatch {
            context: "signals vs classes",
            expected: classes.len(),
            actual: signals.len(),
        });
    }
    check_classes(classes)?;
    if cfg.batch_size < 2 {
        return Err(Error::BatchTooSmall(cfg.batch_size));
    }
    let inputs = signals.iter().map(|s| to_input(s)).collect::<Result<Vec<_>>>()?;
    let mut opt = OptimizerState::sgd(cfg.learning_rate, cfg.momentum)?;
    let mut rng = seeded_rng(cfg.seed ^ 0x5eed_0af0);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            batches.pop();
            let n = batches.len();
            batches[n - 1] = &order[(n - 1) * cfg.batch_size..];
        }
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in batches {
            let xs: Vec<Tensor1D<f32>> = batch.iter().map(|&i| inputs[i].clone()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| classes[i]).collect();
            let (logits, cache) = model.forward(&xs, BnMode::Train)?;
            let (loss, dlogits) = cross_entropy(&logits, &ys);
            if !loss.is_finite() {
                return Err(Error::InvalidArgument(alloc::format!("training diverged at epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            correct += logits
                .iter()
                .zip(&ys)
                .filter(|(z, &y)| usize::from(z[1] > z[0]) == y)
                .count();
            let mut grads = model.zeros_like();
            model.backward(&cache, &dlogits, &mut grads)?;
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut grads, max);
            }
            opt.step(model, &grads);
        }
        log.push(EpochStats {
            epoch,
            loss: loss_sum / inputs.len() as f64,
            accuracy: correct as f64 / inputs.len() as f64,
        });
    }
    Ok(log)
}

/// [`train`] on labeled segments; unlabeled segments are rejected.
pub fn train_segments(model: &mut SelfAfnetModel<f32>, segments: &[Segment], cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    let classes = segments
        .iter()
        .map(|s| s.label.class_index().ok_or_else(|| Error::InvalidArgument("unlabeled training segment".into())))
        .collect::<Result<Vec<_>>>()?;
    let signals: Vec<&[f32]> = segments.iter().map(|s| s.samples.as_slice()).collect();
    train(model, &signals, &classes, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Probability of class 1.
    pub score: f64,
}

impl Prediction {
    pub fn from_logits(logits: [f32; 2]) -> Self {
        let score = positive_score(logits);
        Self {
            class: usize::from(score > 0.5),
            score,
        }
    }
}

pub fn predict_signal(model: &SelfAfnetModel<f32>, samples: &[f32]) -> Result<Prediction> {
    Ok(Prediction::from_logits(model.infer(&to_input(samples)?)?))
}

pub fn predict(model: &SelfAfnetModel<f32>, segment: &Segment) -> Result<Prediction> {
    predict_signal(model, &segment.samples)
}

/// Gate output: the input segments with their quality tag set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GatePartition {
    pub acceptable: Vec<Segment>,
    pub corrupted: Vec<Segment>,
}

/// Tags each segment with a model whose class 1 means corrupted.
pub fn quality_gate(model: &SelfAfnetModel<f32>, segments: Vec<Segment>) -> Result<GatePartition> {
    let mut out = GatePartition::default();
    for mut s in segments {
        if predict(model, &s)?.class == 1 {
            s.quality = Quality::Corrupted;
            out.corrupted.push(s);
        } else {
            s.quality = Quality::Acceptable;
            out.acceptable.push(s);
        }
    }
    Ok(out)
}

/// Stratified assignment of item indices to `k` folds.
///
/// Each class is shuffled and dealt round-robin, continuing where the
/// previous class stopped, so fold sizes and per-class counts both differ
/// by at most one.
pub fn stratified_folds(classes: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(alloc::format!("k must be at least 2, got {k}")));
    }
    let n_classes = classes.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| !by_class[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }
    for &c in &present {
        if by_class[c].len() < k {
            return Err(Error::ClassTooSmall {
                class: c,
                count: by_class[c].len(),
                k,
            });
        }
    }
    let mut rng = seeded_rng(seed ^ 0xf01d);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in present {
        let mut members = core::mem::take(&mut by_class[c]);
        members.shuffle(&mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Trains a fresh model per fold and returns one confusion matrix per test
/// fold, with class 1 as positive.
pub fn kfold_evaluate(signals: &[&[f32]], classes: &[usize], k: usize, cfg: &TrainConfig) -> Result<Vec<ConfusionMatrix>> {
    if signals.len() != classes.len() {
        return Err(Error::ShapeMismatch {
            context: "signals vs classes",
            expected: classes.len(),
            actual: signals.len(),
        });
    }
    let folds = stratified_folds(classes, k, cfg.seed)?;
    let mut out = Vec::with_capacity(k);
    for test in &folds {
        let mut in_test = vec![false; signals.len()];
        test.iter().for_each(|&i| in_test[i] = true);
        let train_idx: Vec<usize> = (0..signals.len()).filter(|&i| !in_test[i]).collect();
        let tr_x: Vec<&[f32]> = train_idx.iter().map(|&i| signals[i]).collect();
        let tr_y: Vec<usize> = train_idx.iter().map(|&i| classes[i]).collect();
        let mut model = cfg.build_model()?;
        train(&mut model, &tr_x, &tr_y, cfg)?;
        let preds = test
            .iter()
            .map(|&i| predict_signal(&model, signals[i]).map(|p| p.class))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<usize> = test.iter().map(|&i| classes[i]).collect();
        out.push(confusion(&preds, &labels, 1)?);
    }
    Ok(out)
}
