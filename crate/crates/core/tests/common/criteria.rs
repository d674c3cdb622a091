//! The oracle and gradient checks, as functions that report what they
//! measured. Test files assert on the results; the acceptance run prints
//! them.

use rand::Rng;
use wppg_core::entropy::{apen, fuzzyen, permen, sampen, EntropyParams, Tolerance};
use wppg_core::metrics::{mann_whitney_auc, metrics, roc_auc, ConfusionMatrix};
use wppg_core::nn::{
    adaptive_avg_pool, adaptive_avg_pool_backward, tanh_backward, tanh_forward, upsample_nearest,
    upsample_nearest_backward, BatchNorm1d, BnMode, ConvUnit, GenerativeNeuronLayer, LayerSpec, Parameterized,
};
use wppg_core::{seeded_rng, SeededRng, Tensor1D};

use super::oracles::*;
use super::*;

pub const CONV_LAYERS: usize = 1000;

/// Worst forward error of random q = 1 layers against plain convolution.
pub fn q1_forward_error(seed: u64, layers: usize) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..layers {
        let (layer, x) = random_q1_layer(&mut rng);
        let spec = *layer.spec();
        let y = layer.forward(&x).unwrap();
        let oracle = plain_conv(&spec, &layer.weights, &layer.bias, &x);
        assert_eq!(y.shape(), (spec.out_channels, oracle[0].len()));
        worst = worst.max(max_abs_diff(y.data(), &oracle.concat()));
    }
    worst
}

/// Same for the weight, bias and input gradients.
pub fn q1_backward_error(seed: u64, layers: usize) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..layers {
        let (layer, x) = random_q1_layer(&mut rng);
        let spec = *layer.spec();
        let out_len = spec.output_length(x.length()).unwrap();
        let r = random_tensor(&mut rng, spec.out_channels, out_len);
        let (grads, dx) = layer.gradients(&x, &r).unwrap();
        let (gw, gb, gx) = plain_conv_backward(&spec, &layer.weights, &x, &r);
        worst = worst
            .max(max_abs_diff(&grads.weights, &gw))
            .max(max_abs_diff(&grads.bias, &gb))
            .max(max_abs_diff(dx.data(), &gx));
    }
    worst
}

pub const INSTANCES: usize = 50;
pub const ORDERS: [usize; 4] = [1, 3, 5, 7];
/// Conv, batch norm and tanh stacked are curved enough that the truncation
/// error of a 1e-4 step reaches the 1e-4 tolerance on some instances, so the
/// composite check uses a finer step. Each layer type on its own is checked
/// at 1e-4.
pub const COMPOSITE_STEP: f64 = 1e-5;

fn random_spec(rng: &mut SeededRng, q: usize, depthwise: bool) -> (LayerSpec, usize) {
    let k = rng.gen_range(1..=5);
    let length = rng.gen_range(k.max(4)..=12);
    let spec = if depthwise {
        LayerSpec::depthwise(rng.gen_range(1..=3), k, q)
    } else {
        LayerSpec::same(rng.gen_range(1..=3), rng.gen_range(1..=3), k, q)
    };
    let spec = spec.with_stride(rng.gen_range(1..=3)).with_padding(rng.gen_range(0..=k / 2));
    (spec, length)
}

fn randomize_bn(rng: &mut SeededRng, bn: &mut BatchNorm1d<f64>) {
    bn.gamma.iter_mut().for_each(|g| *g = rng.gen_range(0.5..1.5));
    bn.beta.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
}

/// Worst relative error of a Self-ONN layer's parameter and input gradients.
pub fn self_onn_audit(q: usize, depthwise: bool, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let (spec, length) = random_spec(&mut rng, q, depthwise);
        let mut layer = GenerativeNeuronLayer::<f64>::new(spec, &mut rng).unwrap();
        layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x = random_tensor(&mut rng, spec.in_channels, length);
        let out_len = spec.output_length(length).unwrap();
        let r = random_tensor(&mut rng, spec.out_channels, out_len);
        let (grads, dx) = layer.gradients(&x, &r).unwrap();
        let rs = [r.clone()];
        let loss = |l: &GenerativeNeuronLayer<f64>, x: &Tensor1D<f64>| probe(&[l.forward(x).unwrap()], &rs);
        worst = worst.max(audit_params(&layer, &grads, 0..layer.param_count(), |l| loss(l, &x)));
        let xs = [x.clone()];
        worst = worst.max(audit_inputs(&xs, &[dx], all_positions(&xs), |xs| loss(&layer, &xs[0])));
    }
    worst
}

pub fn conv_bn_tanh_audit(q: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let depthwise = rng.gen_bool(0.3);
        let (spec, length) = random_spec(&mut rng, q, depthwise);
        let conv = GenerativeNeuronLayer::<f64>::new(spec, &mut rng).unwrap();
        let mut unit = ConvUnit::new(conv, true, true);
        randomize_bn(&mut rng, unit.bn.as_mut().unwrap());
        let batch = rng.gen_range(2..=3);
        let xs: Vec<_> = (0..batch).map(|_| random_tensor(&mut rng, spec.in_channels, length)).collect();
        let out_len = spec.output_length(length).unwrap();
        let rs: Vec<_> = (0..batch).map(|_| random_tensor(&mut rng, spec.out_channels, out_len)).collect();
        let loss = |u: &ConvUnit<f64>, xs: &[Tensor1D<f64>]| {
            let (ys, _) = u.clone().forward(xs, BnMode::Train).unwrap();
            probe(&ys, &rs)
        };
        let (_, cache) = unit.clone().forward(&xs, BnMode::Train).unwrap();
        let mut grads = unit.zeros_like();
        let dxs = unit.backward(&cache, &rs, &mut grads).unwrap();
        let ep = audit_params_with_step(&unit, &grads, 0..unit.param_count(), COMPOSITE_STEP, |u| loss(u, &xs));
        let ei = audit_inputs_with_step(&xs, &dxs, all_positions(&xs), COMPOSITE_STEP, |xs| loss(&unit, xs));
        worst = worst.max(ep).max(ei);
    }
    worst
}

pub fn batchnorm_audit(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let (c, len, batch) = (rng.gen_range(1..=3), rng.gen_range(2..=8), rng.gen_range(2..=4));
        let mut bn = BatchNorm1d::<f64>::new(c);
        randomize_bn(&mut rng, &mut bn);
        let xs: Vec<_> = (0..batch).map(|_| random_tensor(&mut rng, c, len)).collect();
        let rs: Vec<_> = (0..batch).map(|_| random_tensor(&mut rng, c, len)).collect();
        let loss = |bn: &BatchNorm1d<f64>, xs: &[Tensor1D<f64>]| probe(&bn.clone().forward_train(xs).unwrap().0, &rs);
        let (_, cache) = bn.clone().forward_train(&xs).unwrap();
        let mut grads = bn.zeros_like();
        let dxs = bn.backward(&cache, &rs, &mut grads);
        worst = worst.max(audit_params(&bn, &grads, 0..bn.param_count(), |b| loss(b, &xs)));
        worst = worst.max(audit_inputs(&xs, &dxs, all_positions(&xs), |xs| loss(&bn, xs)));
    }
    worst
}

pub fn tanh_audit(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..INSTANCES {
        let (c, len) = (rng.gen_range(1..=3), rng.gen_range(1..=10));
        let x = random_tensor(&mut rng, c, len).map(|v| 2.0 * v);
        let r = random_tensor(&mut rng, c, len);
        let dx = tanh_backward(&tanh_forward(&x), &r);
        let xs = [x];
        let rs = [r];
        worst = worst.max(audit_inputs(&xs, &[dx], all_positions(&xs), |xs| probe(&[tanh_forward(&xs[0])], &rs)));
    }
    worst
}

/// Worst errors for adaptive average pooling and nearest upsampling.
pub fn pool_upsample_audit(seed: u64) -> (f64, f64) {
    let mut rng = seeded_rng(seed);
    let (mut pool_worst, mut up_worst) = (0.0f64, 0.0f64);
    for _ in 0..INSTANCES {
        let (c, len) = (rng.gen_range(1..=3), rng.gen_range(1..=20));
        let target = rng.gen_range(1..=len);
        let x = random_tensor(&mut rng, c, len);
        let r = random_tensor(&mut rng, c, target);
        let dx = adaptive_avg_pool_backward(&r, len);
        let xs = [x.clone()];
        let rs = [r];
        pool_worst = pool_worst.max(audit_inputs(&xs, &[dx], all_positions(&xs), |xs| {
            probe(&[adaptive_avg_pool(&xs[0], target).unwrap()], &rs)
        }));

        let factor = rng.gen_range(1..=3);
        let r = random_tensor(&mut rng, c, len * factor);
        let dx = upsample_nearest_backward(&r, factor);
        let rs = [r];
        up_worst = up_worst.max(audit_inputs(&xs, &[dx], all_positions(&xs), |xs| {
            probe(&[upsample_nearest(&xs[0], factor)], &rs)
        }));
    }
    (pool_worst, up_worst)
}

/// Every trainable layer type, named, with its worst relative error.
pub fn gradient_audit() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for q in ORDERS {
        out.push((format!("self-onn q={q}"), self_onn_audit(q, false, 100 + q as u64)));
        out.push((format!("depthwise self-onn q={q}"), self_onn_audit(q, true, 200 + q as u64)));
        out.push((format!("conv+bn+tanh q={q}"), conv_bn_tanh_audit(q, 300 + q as u64)));
    }
    out.push(("batchnorm".into(), batchnorm_audit(400)));
    out.push(("tanh".into(), tanh_audit(500)));
    let (pool, up) = pool_upsample_audit(600);
    out.push(("adaptive average pool".into(), pool));
    out.push(("nearest upsampling".into(), up));
    out
}

pub const AGREE: f64 = 1e-9;

pub fn entropy_params(r: Tolerance) -> EntropyParams {
    EntropyParams { r, ..EntropyParams::default() }
}

fn close(a: f64, b: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= AGREE
}

/// 100 sequences cycling through lengths 50, 200 and 500 and three kinds.
/// Returns the worst finite disagreement, or the first sequence that
/// disagrees.
pub fn entropy_sweep(seed: u64, mut check: impl FnMut(&[f64]) -> (f64, f64)) -> Result<f64, String> {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = [50, 200, 500][i % 3];
        let x = random_sequence(&mut rng, n, i / 3);
        let (got, want) = check(&x);
        if !close(got, want) {
            return Err(format!("sequence {i} (N={n}): {got} vs {want}"));
        }
        if want.is_finite() {
            worst = worst.max((got - want).abs());
        }
    }
    Ok(worst)
}

/// All four estimators against their references at the default settings.
pub fn entropy_agreement() -> Result<Vec<(String, f64)>, String> {
    let p = EntropyParams::default();
    let r = |x: &[f64]| match p.r {
        Tolerance::RelativeSd(k) => k * sd(x),
        Tolerance::Absolute(r) => r,
    };
    Ok(vec![
        ("ApEn".into(), entropy_sweep(11, |x| (apen(x, &p).unwrap(), ref_apen(x, p.m, r(x))))?),
        ("SampEn".into(), entropy_sweep(13, |x| (sampen(x, &p).unwrap(), ref_sampen(x, p.m, r(x))))?),
        (
            "FuzzyEn".into(),
            entropy_sweep(14, |x| (fuzzyen(x, &p).unwrap(), ref_fuzzyen(x, p.m, r(x), p.fuzzy_power)))?,
        ),
        (
            "PermEn".into(),
            entropy_sweep(18, |x| (permen(x, &p).unwrap(), ref_permen(x, p.perm_order, p.normalize_perm)))?,
        ),
    ])
}

/// Constant, ramp and alternating inputs with known entropies.
pub fn degenerate_entropy() -> Result<(), String> {
    let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(what.to_string()) };
    let abs = entropy_params(Tolerance::Absolute(0.1));
    check(matches!(apen(&[4.2; 300], &abs), Ok(v) if v == 0.0), "constant ApEn with absolute r is not 0")?;
    let ramp: Vec<f64> = (0..300).map(|i| i as f64 * 0.5).collect();
    check(matches!(permen(&ramp, &EntropyParams::default()), Ok(v) if v == 0.0), "ramp PermEn is not 0")?;
    let alt: Vec<f64> = (0..300).map(|i| (i % 2) as f64).collect();
    let below_half_gap = entropy_params(Tolerance::Absolute(0.3));
    check(matches!(sampen(&alt, &below_half_gap), Ok(v) if v == 0.0), "alternation SampEn is not 0")?;
    let pe = permen(&alt, &EntropyParams::default()).map_err(|e| e.to_string())?;
    check(
        (pe - 2f64.ln() / 6f64.ln()).abs() < 1e-9,
        "alternation normalized PermEn is not ln2/ln6",
    )
}

/// Accuracy, precision, sensitivity, specificity and F1 rounded to two
/// decimals for `tp 50, fp 10, tn 30, fn 10`.
pub fn worked_confusion_example() -> [f64; 5] {
    let two_decimals = |v: Option<f64>| (v.unwrap() * 100.0).round() / 100.0;
    let m = metrics(&ConfusionMatrix { tp: 50, fp: 10, tn: 30, fn_: 10 });
    [m.accuracy, m.precision, m.recall, m.specificity, m.f1].map(two_decimals)
}

/// Worst gap between trapezoid AUC, Mann-Whitney and a rank-sum oracle
/// over `sets` random score sets.
pub fn auc_agreement(seed: u64, sets: usize) -> Result<f64, String> {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for i in 0..sets {
        let n = rng.gen_range(2..200);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        // Every third set draws from a handful of values, so ties are common.
        let scores: Vec<f64> = (0..n)
            .map(|k| {
                let signal = if labels[k] { 0.3 } else { 0.0 };
                if i % 3 == 0 {
                    rng.gen_range(0..6) as f64 / 5.0
                } else {
                    rng.gen::<f64>() + signal
                }
            })
            .collect();
        let (curve, auc) = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let mw = mann_whitney_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let rs = rank_sum_auc(&scores, &labels);
        worst = worst.max((auc - mw).abs()).max((auc - rs).abs());
        let monotone = curve.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        if curve.points.first() != Some(&(0.0, 0.0)) || curve.points.last() != Some(&(1.0, 1.0)) || !monotone {
            return Err(format!("set {i}: ROC curve is not a monotone path from (0,0) to (1,1)"));
        }
    }
    Ok(worst)
}
