//! Operational CycleGAN for blind restoration of corrupted segments.
//!
//! Domain X holds corrupted segments, domain C clean ones. `g_x2c` is the
//! restorer; `g_c2x`, `d_c` and `d_x` only exist to train it.

mod nets;

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

pub use nets::{
    DiscriminatorArch, DiscriminatorCache, DiscriminatorNet, GeneratorArch, GeneratorCache, GeneratorNet, DISC_LAYERS,
};

use crate::nn::{clip_global_norm, BnMode, OptimizerState, Parameterized};
use crate::sigproc::{Quality, Segment};
use crate::{seeded_rng, Error, Result, SeededRng, Tensor1D};

type T = f32;

/// Least-squares loss of patch scores against target 1 (real) or 0 (fake),
/// averaged over every patch of every input. Returns the score gradients.
pub fn adversarial_loss(scores: &[Tensor1D<T>], target_real: bool) -> (f64, Vec<Tensor1D<T>>) {
    let target = if target_real { 1.0 } else { 0.0 };
    let count: usize = scores.iter().map(|s| s.data().len()).sum();
    let n = count.max(1) as f64;
    let mut loss = 0.0;
    let grads = scores
        .iter()
        .map(|s| {
            s.map(|v| {
                let d = v as f64 - target;
                loss += d * d;
                (2.0 * d / n) as T
            })
        })
        .collect();
    (loss / n, grads)
}

/// Mean absolute error over all samples, with its gradient with respect to `pred`.
pub fn l1_loss(pred: &[Tensor1D<T>], target: &[Tensor1D<T>]) -> (f64, Vec<Tensor1D<T>>) {
    let count: usize = pred.iter().map(|s| s.data().len()).sum();
    let n = count.max(1) as f64;
    let mut loss = 0.0;
    let grads = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let data = p
                .data()
                .iter()
                .zip(t.data())
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    loss += d.abs();
                    (if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    } / n) as T
                })
                .collect();
            Tensor1D::new(p.channels(), p.length(), data).expect("same shape as prediction")
        })
        .collect();
    (loss / n, grads)
}

/// Cycle loss from precomputed round trips: `|c2x(x2c(x)) - x| + |x2c(c2x(c)) - c|`.
pub fn cycle_loss(x: &[Tensor1D<T>], x_round: &[Tensor1D<T>], c: &[Tensor1D<T>], c_round: &[Tensor1D<T>]) -> f64 {
    l1_loss(x_round, x).0 + l1_loss(c_round, c).0
}

/// Identity loss from precomputed outputs: `|x2c(c) - c| + |c2x(x) - x|`.
pub fn identity_loss(c: &[Tensor1D<T>], x2c_of_c: &[Tensor1D<T>], x: &[Tensor1D<T>], c2x_of_x: &[Tensor1D<T>]) -> f64 {
    l1_loss(x2c_of_c, c).0 + l1_loss(c2x_of_x, x).0
}

/// Unweighted generator loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub adv1: f64,
    pub adv2: f64,
    pub cycle: f64,
    pub identity: f64,
}

/// `adv1 + adv2 + lambda * cycle + beta * identity`.
pub fn total_loss(c: &LossComponents, lambda_cyc: f64, beta_ide: f64) -> f64 {
    c.adv1 + c.adv2 + lambda_cyc * c.cycle + beta_ide * c.identity
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleGanConfig {
    pub lambda_cyc: f64,
    pub beta_ide: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub replay_size: usize,
    pub clip_norm: f64,
    pub generator: GeneratorArch,
    pub discriminator: DiscriminatorArch,
    pub seed: u64,
}

impl Default for CycleGanConfig {
    fn default() -> Self {
        Self {
            lambda_cyc: 0.5,
            beta_ide: 0.25,
            learning_rate: 5e-4,
            epochs: 150,
            batch_size: 16,
            replay_size: 50,
            clip_norm: 5.0,
            generator: GeneratorArch::default(),
            discriminator: DiscriminatorArch::default(),
            seed: 0,
        }
    }
}

impl CycleGanConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda_cyc >= 0.0 && self.beta_ide >= 0.0) {
            return Err(Error::InvalidArgument("loss weights must be nonnegative".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        Ok(())
    }
}

/// Pool of past fakes. Once full, each new fake is returned as is or
/// swapped with a random stored one, with equal odds.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Tensor1D<T>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn query<R: Rng>(&mut self, fakes: &[Tensor1D<T>], rng: &mut R) -> Vec<Tensor1D<T>> {
        if self.capacity == 0 {
            return fakes.to_vec();
        }
        fakes
            .iter()
            .map(|f| {
                if self.items.len() < self.capacity {
                    self.items.push(f.clone());
                    f.clone()
                } else if rng.gen_bool(0.5) {
                    let i = rng.gen_range(0..self.items.len());
                    core::mem::replace(&mut self.items[i], f.clone())
                } else {
                    f.clone()
                }
            })
            .collect()
    }
}

/// Two generators, two discriminators and their optimizers.
#[derive(Debug, Clone)]
pub struct CycleGanState {
    pub g_x2c: GeneratorNet<T>,
    pub g_c2x: GeneratorNet<T>,
    pub d_c: DiscriminatorNet<T>,
    pub d_x: DiscriminatorNet<T>,
    pub config: CycleGanConfig,
    opt: [OptimizerState<T>; 4],
    buffers: [ReplayBuffer; 2],
    rng: SeededRng,
}

/// Per-epoch means over batches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GanEpochStats {
    pub epoch: usize,
    pub generator: LossComponents,
    pub total: f64,
    pub d_c: f64,
    pub d_x: f64,
    pub generator_updates: usize,
    pub discriminator_updates: usize,
}

impl CycleGanState {
    pub fn new(config: CycleGanConfig) -> Result<Self> {
        config.validate()?;
        let s = config.seed;
        let lr = config.learning_rate;
        Ok(Self {
            g_x2c: GeneratorNet::new(&config.generator, s.wrapping_add(1))?,
            g_c2x: GeneratorNet::new(&config.generator, s.wrapping_add(2))?,
            d_c: DiscriminatorNet::new(&config.discriminator, s.wrapping_add(3))?,
            d_x: DiscriminatorNet::new(&config.discriminator, s.wrapping_add(4))?,
            opt: [
                OptimizerState::adam(lr)?,
                OptimizerState::adam(lr)?,
                OptimizerState::adam(lr)?,
                OptimizerState::adam(lr)?,
            ],
            buffers: [ReplayBuffer::new(config.replay_size), ReplayBuffer::new(config.replay_size)],
            rng: seeded_rng(s ^ 0xc1c1e),
            config,
        })
    }

    /// Rebuilds a state around trained networks, with fresh optimizers.
    pub fn from_networks(
        config: CycleGanConfig,
        g_x2c: GeneratorNet<T>,
        g_c2x: GeneratorNet<T>,
        d_c: DiscriminatorNet<T>,
        d_x: DiscriminatorNet<T>,
    ) -> Result<Self> {
        let mut state = Self::new(CycleGanConfig {
            generator: *g_x2c.arch(),
            discriminator: *d_c.arch(),
            ..config
        })?;
        state.g_x2c = g_x2c;
        state.g_c2x = g_c2x;
        state.d_c = d_c;
        state.d_x = d_x;
        Ok(state)
    }

    /// One generator update followed by one update of each discriminator.
    fn train_step(&mut self, x: &[Tensor1D<T>], c: &[Tensor1D<T>]) -> Result<(LossComponents, f64, f64)> {
        let (lambda, beta) = (self.config.lambda_cyc as T, self.config.beta_ide as T);
        let scale = |v: &mut Vec<Tensor1D<T>>, k: T| v.iter_mut().for_each(|t| t.data_mut().iter_mut().for_each(|e| *e *= k));

        let (fake_c, cache_a) = self.g_x2c.forward(x, BnMode::Train)?;
        let (rec_x, cache_b) = self.g_c2x.forward(&fake_c, BnMode::Train)?;
        let (fake_x, cache_c) = self.g_c2x.forward(c, BnMode::Train)?;
        let (rec_c, cache_d) = self.g_x2c.forward(&fake_x, BnMode::Train)?;
        let (idt_c, cache_e) = self.g_x2c.forward(c, BnMode::Train)?;
        let (idt_x, cache_f) = self.g_c2x.forward(x, BnMode::Train)?;

        let (sc, dsc_cache) = self.d_c.forward(&fake_c)?;
        let (sx, dsx_cache) = self.d_x.forward(&fake_x)?;
        let (adv1, dsc) = adversarial_loss(&sc, true);
        let (adv2, dsx) = adversarial_loss(&sx, true);
        let (cyc_x, mut drec_x) = l1_loss(&rec_x, x);
        let (cyc_c, mut drec_c) = l1_loss(&rec_c, c);
        let (ide_c, mut didt_c) = l1_loss(&idt_c, c);
        let (ide_x, mut didt_x) = l1_loss(&idt_x, x);
        scale(&mut drec_x, lambda);
        scale(&mut drec_c, lambda);
        scale(&mut didt_c, beta);
        scale(&mut didt_x, beta);

        let mut gx = self.g_x2c.zeros_like();
        let mut gc = self.g_c2x.zeros_like();
        let mut dfake_c = self.d_c.backward(&dsc_cache, &dsc, None)?;
        let mut dfake_x = self.d_x.backward(&dsx_cache, &dsx, None)?;
        for (a, b) in dfake_c.iter_mut().zip(self.g_c2x.backward(&cache_b, &drec_x, &mut gc)?) {
            a.add_assign(&b);
        }
        for (a, b) in dfake_x.iter_mut().zip(self.g_x2c.backward(&cache_d, &drec_c, &mut gx)?) {
            a.add_assign(&b);
        }
        self.g_x2c.backward(&cache_a, &dfake_c, &mut gx)?;
        self.g_c2x.backward(&cache_c, &dfake_x, &mut gc)?;
        self.g_x2c.backward(&cache_e, &didt_c, &mut gx)?;
        self.g_c2x.backward(&cache_f, &didt_x, &mut gc)?;
        clip_global_norm(&mut gx, self.config.clip_norm);
        clip_global_norm(&mut gc, self.config.clip_norm);
        self.opt[0].step(&mut self.g_x2c, &gx);
        self.opt[1].step(&mut self.g_c2x, &gc);

        let components = LossComponents {
            adv1,
            adv2,
            cycle: cyc_x + cyc_c,
            identity: ide_c + ide_x,
        };
        let hist_c = self.buffers[0].query(&fake_c, &mut self.rng);
        let hist_x = self.buffers[1].query(&fake_x, &mut self.rng);
        let d_c_loss = Self::disc_step(&mut self.d_c, &mut self.opt[2], c, &hist_c, self.config.clip_norm)?;
        let d_x_loss = Self::disc_step(&mut self.d_x, &mut self.opt[3], x, &hist_x, self.config.clip_norm)?;
        Ok((components, d_c_loss, d_x_loss))
    }

    /// Half the sum of the real and fake least-squares losses.
    fn disc_step(
        d: &mut DiscriminatorNet<T>,
        opt: &mut OptimizerState<T>,
        real: &[Tensor1D<T>],
        fake: &[Tensor1D<T>],
        clip: f64,
    ) -> Result<f64> {
        let mut g = d.zeros_like();
        let (sr, cr) = d.forward(real)?;
        let (sf, cf) = d.forward(fake)?;
        let (lr, mut dr) = adversarial_loss(&sr, true);
        let (lf, mut df) = adversarial_loss(&sf, false);
        for t in dr.iter_mut().chain(df.iter_mut()) {
            t.data_mut().iter_mut().for_each(|v| *v *= 0.5);
        }
        d.backward(&cr, &dr, Some(&mut g))?;
        d.backward(&cf, &df, Some(&mut g))?;
        clip_global_norm(&mut g, clip);
        opt.step(d, &g);
        Ok(0.5 * (lr + lf))
    }
}

fn to_tensors(signals: &[&[f32]]) -> Result<Vec<Tensor1D<T>>> {
    signals.iter().map(|s| Tensor1D::from_signal(s)).collect()
}

/// Batches of `size` positions over `0..n`; a trailing singleton joins the
/// previous batch.
fn batch_ranges(n: usize, size: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n).step_by(size).map(|s| (s, (s + size).min(n))).collect();
    if out.len() > 1 && out.last().is_some_and(|&(a, b)| b - a == 1) {
        let last = out.pop().expect("checked non-empty");
        out.last_mut().expect("more than one batch").1 = last.1;
    }
    out
}

/// Trains on unpaired domains. Each epoch walks `max(|X|, |C|)` positions
/// in batches; the smaller domain wraps around its own shuffled order.
pub fn train_cyclegan(state: &mut CycleGanState, corrupted: &[&[f32]], clean: &[&[f32]]) -> Result<Vec<GanEpochStats>> {
    if corrupted.is_empty() {
        return Err(Error::EmptyDomain("corrupted"));
    }
    if clean.is_empty() {
        return Err(Error::EmptyDomain("clean"));
    }
    let xs = to_tensors(corrupted)?;
    let cs = to_tensors(clean)?;
    let n = xs.len().max(cs.len());
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    let mut order_x: Vec<usize> = (0..xs.len()).collect();
    let mut order_c: Vec<usize> = (0..cs.len()).collect();
    let mut log = Vec::with_capacity(state.config.epochs);
    for epoch in 0..state.config.epochs {
        order_x.shuffle(&mut state.rng);
        order_c.shuffle(&mut state.rng);
        let mut stats = GanEpochStats {
            epoch,
            ..Default::default()
        };
        let batches = batch_ranges(n, state.config.batch_size);
        for &(lo, hi) in &batches {
            let bx: Vec<_> = (lo..hi).map(|i| xs[order_x[i % xs.len()]].clone()).collect();
            let bc: Vec<_> = (lo..hi).map(|i| cs[order_c[i % cs.len()]].clone()).collect();
            let (comp, dc, dx) = state.train_step(&bx, &bc)?;
            let total = total_loss(&comp, state.config.lambda_cyc, state.config.beta_ide);
            if !total.is_finite() {
                return Err(Error::InvalidArgument(alloc::format!("training diverged at epoch {epoch}")));
            }
            stats.generator.adv1 += comp.adv1;
            stats.generator.adv2 += comp.adv2;
            stats.generator.cycle += comp.cycle;
            stats.generator.identity += comp.identity;
            stats.total += total;
            stats.d_c += dc;
            stats.d_x += dx;
            stats.generator_updates += 1;
            stats.discriminator_updates += 1;
        }
        let k = batches.len() as f64;
        stats.generator.adv1 /= k;
        stats.generator.adv2 /= k;
        stats.generator.cycle /= k;
        stats.generator.identity /= k;
        stats.total /= k;
        stats.d_c /= k;
        stats.d_x /= k;
        log.push(stats);
    }
    Ok(log)
}

/// Applies `g_x2c` once or twice and clamps to `[0, 1]`.
pub fn restore_signal(generator: &GeneratorNet<T>, samples: &[f32], passes: usize) -> Result<Vec<f32>> {
    if !(1..=2).contains(&passes) {
        return Err(Error::InvalidArgument(alloc::format!("passes must be 1 or 2, got {passes}")));
    }
    let mut x = Tensor1D::from_signal(samples)?;
    for _ in 0..passes {
        x = generator.infer(&x)?.map(|v| v.clamp(0.0, 1.0));
    }
    Ok(x.into_data())
}

/// Restores an acceptable (or not yet assessed) segment.
pub fn restore(segment: &Segment, state: &CycleGanState, passes: usize) -> Result<Segment> {
    if segment.quality == Quality::Corrupted {
        return Err(Error::CorruptedInput);
    }
    let mut out = segment.clone();
    out.samples = restore_signal(&state.g_x2c, &segment.samples, passes)?;
    Ok(out)
}
