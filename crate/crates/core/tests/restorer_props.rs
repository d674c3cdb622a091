//! Generator and discriminator backward passes, losses and restoration.

mod common;

use common::*;
use rand::Rng;
use wppg_core::nn::{BnMode, Parameterized};
use wppg_core::restorer::{
    restore, restore_signal, train_cyclegan, CycleGanConfig, CycleGanState, DiscriminatorArch, DiscriminatorNet,
    GeneratorArch, GeneratorNet,
};
use wppg_core::sigproc::{Modality, Quality, Segment, SourceKey, SEGMENT_LEN};
use wppg_core::{seeded_rng, Tensor1D};

fn small_generator(q: usize) -> GeneratorArch {
    GeneratorArch { q, channels: (2, 3), res_blocks: 2 }
}

fn small_discriminator(q: usize) -> DiscriminatorArch {
    DiscriminatorArch { q, channels: [2, 2, 3, 2, 2] }
}

#[test]
fn generator_gradients_match_finite_differences() {
    let mut rng = seeded_rng(50);
    for q in [1, 3, 5, 7] {
        let mut worst = 0.0f64;
        for seed in 0..3 {
            let g = GeneratorNet::<f64>::new(&small_generator(q), seed).unwrap();
            let xs: Vec<Tensor1D<f64>> = (0..2).map(|_| random_tensor(&mut rng, 1, 32).map(|v| 0.5 + 0.5 * v)).collect();
            let rs: Vec<Tensor1D<f64>> = (0..2).map(|_| random_tensor(&mut rng, 1, 32)).collect();
            let loss = |g: &GeneratorNet<f64>, xs: &[Tensor1D<f64>]| probe(&g.clone().forward(xs, BnMode::Train).unwrap().0, &rs);
            let (_, cache) = g.clone().forward(&xs, BnMode::Train).unwrap();
            let mut grads = g.zeros_like();
            let dxs = g.backward(&cache, &rs, &mut grads).unwrap();
            let idx = sample_indices(&mut rng, g.param_count(), 60);
            worst = worst.max(audit_params_with_step(&g, &grads, idx, 1e-5, |g| loss(g, &xs)));
            let pos = all_positions(&xs);
            let picks = sample_indices(&mut rng, pos.len(), 30).into_iter().map(|i| pos[i]);
            worst = worst.max(audit_inputs_with_step(&xs, &dxs, picks, 1e-5, |xs| loss(&g, xs)));
        }
        println!("generator q={q}: worst relative error {worst:.3e}");
        assert!(worst < FD_TOL);
    }
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    let mut rng = seeded_rng(51);
    for q in [1, 3, 5, 7] {
        let mut worst = 0.0f64;
        for seed in 0..5 {
            let d = DiscriminatorNet::<f64>::new(&small_discriminator(q), seed).unwrap();
            let xs: Vec<Tensor1D<f64>> = (0..2).map(|_| random_tensor(&mut rng, 1, 128)).collect();
            let (ys, cache) = d.forward(&xs).unwrap();
            let rs: Vec<Tensor1D<f64>> = ys.iter().map(|y| random_tensor(&mut rng, 1, y.length())).collect();
            let loss = |d: &DiscriminatorNet<f64>, xs: &[Tensor1D<f64>]| probe(&d.forward(xs).unwrap().0, &rs);
            let mut grads = d.zeros_like();
            let dxs = d.backward(&cache, &rs, Some(&mut grads)).unwrap();
            // No-BN stacks are audited at the standard step.
            worst = worst.max(audit_params(&d, &grads, 0..d.param_count(), |d| loss(d, &xs)));
            let pos = all_positions(&xs);
            let picks = sample_indices(&mut rng, pos.len(), 40).into_iter().map(|i| pos[i]);
            worst = worst.max(audit_inputs(&xs, &dxs, picks, |xs| loss(&d, xs)));
            assert_eq!(d.backward(&cache, &rs, None).unwrap(), dxs);
        }
        println!("discriminator q={q}: worst relative error {worst:.3e}");
        assert!(worst < FD_TOL);
    }
}

#[test]
fn default_networks_have_expected_shapes() {
    let g = GeneratorNet::<f32>::new(&GeneratorArch::default(), 0).unwrap();
    let d = DiscriminatorNet::<f32>::new(&DiscriminatorArch::default(), 0).unwrap();
    let x = Tensor1D::from_signal(&vec![0.5f32; SEGMENT_LEN]).unwrap();
    assert_eq!(g.infer(&x).unwrap().shape(), (1, SEGMENT_LEN));
    assert_eq!(d.infer(&x).unwrap().shape(), (1, 39));
    assert!(g.infer(&Tensor1D::from_signal(&[0.5f32; 10]).unwrap()).is_err());

    let back = GeneratorNet::<f32>::from_records(&g.to_records()).unwrap();
    assert_eq!(back, g);
    assert_eq!(DiscriminatorNet::<f32>::from_records(&d.to_records()).unwrap(), d);
}

fn signals(n: usize, len: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| (0..len).map(|_| rng.gen::<f32>()).collect()).collect()
}

fn tiny_config(seed: u64) -> CycleGanConfig {
    CycleGanConfig {
        epochs: 2,
        batch_size: 4,
        generator: small_generator(3),
        discriminator: small_discriminator(3),
        seed,
        ..CycleGanConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_walks_the_larger_domain() {
    let x = signals(9, 64, 1);
    let c = signals(5, 64, 2);
    let xr: Vec<&[f32]> = x.iter().map(|v| v.as_slice()).collect();
    let cr: Vec<&[f32]> = c.iter().map(|v| v.as_slice()).collect();
    let run = || {
        let mut st = CycleGanState::new(tiny_config(3)).unwrap();
        let log = train_cyclegan(&mut st, &xr, &cr).unwrap();
        (st.g_x2c.flat_params(), log)
    };
    let (p1, log1) = run();
    let (p2, log2) = run();
    assert_eq!(p1, p2);
    assert_eq!(log1, log2);
    // Nine positions in batches of four: 4 + 5, the trailing one merged.
    assert_eq!(log1[0].generator_updates, 2);
    assert!(log1.iter().all(|e| e.total.is_finite() && e.d_c >= 0.0 && e.d_x >= 0.0));

    let mut st = CycleGanState::new(tiny_config(3)).unwrap();
    assert!(train_cyclegan(&mut st, &[], &cr).is_err());
    assert!(CycleGanState::new(CycleGanConfig { batch_size: 1, ..tiny_config(0) }).is_err());
}

#[test]
fn restoration_stays_in_range_and_composes() {
    let st = CycleGanState::new(tiny_config(4)).unwrap();
    let x = &signals(1, SEGMENT_LEN, 5)[0];
    let once = restore_signal(&st.g_x2c, x, 1).unwrap();
    let twice = restore_signal(&st.g_x2c, x, 2).unwrap();
    assert!(once.iter().chain(&twice).all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(restore_signal(&st.g_x2c, &once, 1).unwrap(), twice);
    assert!(restore_signal(&st.g_x2c, x, 3).is_err());

    let mut seg = Segment::new(x.clone(), Modality::Ppg, SourceKey { subject_id: "r".into(), window: 0 }).unwrap();
    seg.quality = Quality::Acceptable;
    let out = restore(&seg, &st, 1).unwrap();
    assert_eq!(out.samples, once);
    assert_eq!(out.source, seg.source);
    seg.quality = Quality::Corrupted;
    assert!(restore(&seg, &st, 1).is_err());
}
