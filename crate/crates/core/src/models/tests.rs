use rand::Rng;

use super::*;
use crate::seed;

fn random_batch(n: usize, c: usize, h: usize, w: usize, s: u64) -> Tensor {
    let mut rng = seed::rng(s);
    Tensor::from_shape_simple_fn((n, c, h, w), || rng.random::<f64>())
}

fn small_esrgan() -> GeneratorConfig {
    GeneratorConfig {
        n_blocks: 2,
        base_channels: 16,
        rdb_per_rrdb: 3,
        convs_per_rdb: 5,
        growth_channels: 8,
        dropout_count: 2,
        ..GeneratorConfig::esrgan()
    }
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn srgan_generator_scales_by_four() {
    let g = build_srgan_generator(GeneratorConfig::tiny_srgan(), 1).unwrap();
    let y = g.forward(&random_batch(1, 3, 64, 64, 2), None).unwrap();
    assert_eq!(y.dim(), (1, 3, 256, 256));
    assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn construction_is_deterministic() {
    for arch in [
        Architecture::SrganGenerator(GeneratorConfig::tiny_srgan()),
        Architecture::EsrganGenerator(small_esrgan()),
        Architecture::SrganDiscriminator(DiscriminatorConfig {
            base_channels: 8,
            ..DiscriminatorConfig::srgan()
        }),
        Architecture::EsrganDiscriminator(DiscriminatorConfig {
            base_channels: 8,
            ..DiscriminatorConfig::esrgan()
        }),
    ] {
        let a = Model::build(arch.clone(), 5).unwrap();
        let b = Model::build(arch.clone(), 5).unwrap();
        let c = Model::build(arch, 6).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }
}

#[test]
fn kaiming_std_for_64_channel_3x3_conv() {
    let g = build_srgan_generator(GeneratorConfig::srgan(), 11).unwrap();
    let w = &g
        .params()
        .iter()
        .find(|p| p.name == "block.0.conv1.weight")
        .unwrap()
        .value;
    assert_eq!(w.dim(), (64, 64, 3, 3));
    assert!(w.len() >= 10_000);
    let n = w.len() as f64;
    let mean = w.sum() / n;
    let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let expect = (2.0f64 / 576.0).sqrt();
    assert!((std - expect).abs() < 0.1 * expect, "{std} vs {expect}");
}

#[test]
fn parameter_counts_match_closed_form() {
    let archs = [
        Architecture::SrganGenerator(GeneratorConfig::srgan()),
        Architecture::SrganGenerator(GeneratorConfig {
            scale: 2,
            image_channels: 1,
            ..GeneratorConfig::tiny_srgan()
        }),
        Architecture::EsrganGenerator(GeneratorConfig::esrgan()),
        Architecture::EsrganGenerator(small_esrgan()),
        Architecture::EsrganGenerator(GeneratorConfig {
            convs_per_rdb: 1,
            ..small_esrgan()
        }),
        Architecture::SrganDiscriminator(DiscriminatorConfig::srgan()),
        Architecture::EsrganDiscriminator(DiscriminatorConfig {
            n_stages: 2,
            ..DiscriminatorConfig::esrgan()
        }),
    ];
    for arch in archs {
        let m = Model::build(arch.clone(), 0).unwrap();
        assert_eq!(m.param_count(), arch.param_count(), "{arch:?}");
    }
    // hand total for the 16-block default
    let conv = |cin: usize, cout: usize| cin * cout * 9 + cout;
    let rdb = conv(64, 32) + conv(96, 32) + conv(128, 32) + conv(160, 32) + conv(192, 64);
    let hand = conv(3, 64) + 16 * 3 * rdb + conv(64, 64) + 2 * conv(64, 256) + conv(64, 64) + conv(64, 3);
    assert_eq!(GeneratorConfig::esrgan().esrgan_param_count(), hand);
}

#[test]
fn discriminator_outputs_probabilities() {
    let cfg = DiscriminatorConfig {
        base_channels: 8,
        n_stages: 3,
        ..DiscriminatorConfig::srgan()
    };
    let d = build_srgan_discriminator(cfg, 3).unwrap();
    let p = d.forward(&random_batch(8, 3, 32, 32, 4), None).unwrap();
    assert_eq!(p.dim(), (8, 1, 1, 1));
    assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
}

#[test]
fn discriminator_stage_arithmetic() {
    let two = DiscriminatorConfig {
        base_channels: 8,
        n_stages: 2,
        ..DiscriminatorConfig::srgan()
    };
    let four = DiscriminatorConfig {
        n_stages: 4,
        ..two.clone()
    };
    let (h2, w2) = two.final_grid(64, 64);
    let (h4, w4) = four.final_grid(64, 64);
    assert_eq!((h2 / 4, w2 / 4), (h4, w4));
    let a = build_srgan_discriminator(two.clone(), 0).unwrap();
    let b = build_srgan_discriminator(four.clone(), 0).unwrap();
    assert_eq!(a.param_count(), two.param_count());
    assert_eq!(b.param_count(), four.param_count());
    assert!(b.param_count() > a.param_count());
}

#[test]
fn relativistic_discriminator_emits_logits() {
    let cfg = DiscriminatorConfig {
        base_channels: 8,
        n_stages: 2,
        ..DiscriminatorConfig::esrgan()
    };
    let d = build_esrgan_discriminator(cfg.clone(), 9).unwrap();
    let x = random_batch(4, 3, 16, 16, 1);
    let a = d.forward(&x, None).unwrap();
    assert_eq!(a.dim(), (4, 1, 1, 1));
    assert!(a.iter().all(|v| v.is_finite()));
    let twice = Tensor::from_shape_fn((2, 3, 16, 16), |(_, c, i, j)| x[[0, c, i, j]]);
    let t = d.forward(&twice, None).unwrap();
    assert_eq!(t[[0, 0, 0, 0]].to_bits(), t[[1, 0, 0, 0]].to_bits());
    let zero = Tensor::zeros((1, 3, 16, 16));
    let z1 = d.forward(&zero, None).unwrap();
    let z2 = build_esrgan_discriminator(cfg, 9)
        .unwrap()
        .forward(&zero, None)
        .unwrap();
    assert!(z1[[0, 0, 0, 0]].is_finite());
    assert_eq!(bits(&z1), bits(&z2));
    assert!(build_esrgan_discriminator(DiscriminatorConfig::srgan(), 0).is_err());
}

#[test]
fn esrgan_scale_and_fully_convolutional() {
    let g = build_esrgan_generator(small_esrgan(), 2).unwrap();
    for (h, w) in [(16, 16), (24, 24), (64, 64), (9, 13)] {
        let y = g.forward(&random_batch(1, 3, h, w, 3), None).unwrap();
        assert_eq!(y.dim(), (1, 3, 4 * h, 4 * w));
    }
}

#[test]
fn zero_residual_scale_makes_rrdb_identity() {
    let cfg = GeneratorConfig {
        residual_scale: 0.0,
        ..small_esrgan()
    };
    let g = build_esrgan_generator(cfg, 4).unwrap();
    let feats = random_batch(2, 16, 8, 8, 5);
    for b in 0..2 {
        assert_eq!(bits(&g.rrdb_forward(b, &feats).unwrap()), bits(&feats));
    }
    let g = build_esrgan_generator(small_esrgan(), 4).unwrap();
    assert_ne!(g.rrdb_forward(0, &feats).unwrap(), feats);
}

#[test]
fn dense_block_channel_bookkeeping() {
    let g = build_esrgan_generator(small_esrgan(), 4).unwrap();
    let chans = g.rdb_input_channels(1, 2).unwrap();
    assert_eq!(chans, (1..=5).map(|k| 16 + (k - 1) * 8).collect::<Vec<_>>());
}

#[test]
fn dropout_behaviour() {
    let input = random_batch(1, 3, 8, 8, 6);
    let off = GeneratorConfig {
        dropout_p: 0.0,
        ..small_esrgan()
    };
    let g = build_esrgan_generator(off, 7).unwrap();
    let a = g.forward(&input, None).unwrap();
    let b = g.forward(&input, Some(&mut seed::rng(1))).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(bits(&a), bits(&g.forward(&input, None).unwrap()));

    let g = build_esrgan_generator(
        GeneratorConfig {
            dropout_p: 0.3,
            ..small_esrgan()
        },
        7,
    )
    .unwrap();
    let s1 = g.forward(&input, Some(&mut seed::rng(1))).unwrap();
    let s1b = g.forward(&input, Some(&mut seed::rng(1))).unwrap();
    let s2 = g.forward(&input, Some(&mut seed::rng(2))).unwrap();
    assert_eq!(bits(&s1), bits(&s1b));
    assert_ne!(s1, s2);
    assert_eq!(g.dropout_positions(), vec![0, 1]);
}

#[test]
fn channel_mismatch_is_shape_error() {
    let g = build_esrgan_generator(small_esrgan(), 0).unwrap();
    assert!(matches!(
        g.forward(&random_batch(1, 1, 8, 8, 0), None),
        Err(Error::Shape(_))
    ));
}

#[test]
fn load_params_checks_names_and_shapes() {
    let mut a = build_esrgan_generator(small_esrgan(), 0).unwrap();
    let b = build_esrgan_generator(
        GeneratorConfig {
            growth_channels: 4,
            ..small_esrgan()
        },
        0,
    )
    .unwrap();
    assert!(a.load_params(b.params().to_vec()).is_err());
    let c = build_esrgan_generator(small_esrgan(), 1).unwrap();
    a.load_params(c.params().to_vec()).unwrap();
    assert_eq!(a.params(), c.params());
}

/// Parameter gradients of a whole generator against central differences.
#[test]
fn generator_parameter_gradients() {
    let cfg = GeneratorConfig {
        n_blocks: 1,
        base_channels: 4,
        rdb_per_rrdb: 2,
        convs_per_rdb: 3,
        growth_channels: 2,
        scale: 2,
        dropout_count: 1,
        dropout_p: 0.2,
        ..GeneratorConfig::esrgan()
    };
    for arch in [
        Architecture::EsrganGenerator(cfg.clone()),
        Architecture::SrganGenerator(GeneratorConfig {
            base_channels: 3,
            n_blocks: 2,
            ..cfg
        }),
    ] {
        let model = Model::build(arch, 3).unwrap();
        let x = random_batch(2, 3, 4, 4, 8);
        let weights = random_batch(2, 3, 8, 8, 9);
        let objective = |m: &Model| {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let y = m.forward_tape(&mut tape, xv, Some(&mut seed::rng(4))).unwrap();
            (tape.value(y) * &weights).sum()
        };
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = model.forward_tape(&mut tape, xv, Some(&mut seed::rng(4))).unwrap();
        let grads = tape
            .backward(y, weights.clone())
            .unwrap()
            .collect_params(&tape, &model.param_shapes());
        let h = 1e-6;
        for (pi, p) in model.params().iter().enumerate() {
            for idx in (0..p.value.len()).step_by(7.max(p.value.len() / 5)) {
                let mut plus = model.clone();
                plus.params_mut()[pi].value.as_slice_mut().unwrap()[idx] += h;
                let mut minus = model.clone();
                minus.params_mut()[pi].value.as_slice_mut().unwrap()[idx] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let analytic = grads[pi].as_slice().unwrap()[idx];
                assert!(
                    (analytic - numeric).abs() <= 1e-5 * (1.0 + analytic.abs()),
                    "{} [{idx}]: {analytic} vs {numeric}",
                    p.name
                );
            }
        }
    }
}
