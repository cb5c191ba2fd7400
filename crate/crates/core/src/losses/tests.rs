use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::nn::Tensor;
use crate::seed::rng;

const H: f64 = 1e-6;

fn random(shape: (usize, usize, usize, usize), seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_shape_simple_fn(shape, || r.random::<f64>())
}

fn random_vec(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| lo + (hi - lo) * r.random::<f64>()).collect()
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-3 * analytic.abs().max(numeric.abs()) + 1e-9
}

fn check_tensor(f: impl Fn(&Tensor) -> f64, x: &Tensor, grad: &Tensor) {
    for (idx, g) in grad.indexed_iter() {
        let mut p = x.clone();
        p[idx] += H;
        let mut m = x.clone();
        m[idx] -= H;
        let n = (f(&p) - f(&m)) / (2.0 * H);
        assert!(close(*g, n), "at {idx:?}: analytic {g}, numeric {n}");
    }
}

fn check_vec(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) {
    for i in 0..x.len() {
        let mut p = x.to_vec();
        p[i] += H;
        let mut m = x.to_vec();
        m[i] -= H;
        let n = (f(&p) - f(&m)) / (2.0 * H);
        assert!(close(grad[i], n), "at {i}: analytic {}, numeric {n}", grad[i]);
    }
}

fn small_extractor() -> FeatureExtractor {
    FeatureExtractor::random(VggConfig::small(), None, 3, 11).unwrap()
}

#[test]
fn content_l1_examples() {
    let hr = random((2, 3, 8, 8), 1);
    assert_eq!(content_l1(&hr, &hr).unwrap(), 0.0);
    let sr = &hr + 0.3;
    assert_abs_diff_eq!(content_l1(&sr, &hr).unwrap(), 0.3, epsilon = 1e-12);
    let sr = random((2, 3, 8, 8), 2);
    let mut brute = 0.0;
    for (a, b) in sr.iter().zip(hr.iter()) {
        brute += (a - b).abs();
    }
    assert_abs_diff_eq!(content_l1(&sr, &hr).unwrap(), brute / 384.0, epsilon = 1e-7);
    assert!(content_l1(&sr, &random((1, 3, 8, 8), 3)).is_err());
}

#[test]
fn perceptual_examples() {
    let hr = random((1, 3, 8, 8), 4);
    let ex = small_extractor();
    for norm in [Norm::L1, Norm::L2] {
        assert_eq!(perceptual(&hr, &hr, &ex, norm).unwrap(), 0.0);
        assert_eq!(perceptual(&hr, &hr, &FeatureExtractor::identity(), norm).unwrap(), 0.0);
    }
    let id = FeatureExtractor::identity();
    let sr = &hr + 0.1;
    assert_abs_diff_eq!(perceptual(&sr, &hr, &id, Norm::L2).unwrap(), 0.01, epsilon = 1e-12);
    let sr = random((1, 3, 8, 8), 5);
    assert_eq!(
        perceptual(&sr, &hr, &id, Norm::L1).unwrap(),
        content_l1(&sr, &hr).unwrap()
    );
    assert!(perceptual(&sr, &random((1, 3, 8, 4), 6), &ex, Norm::L2).is_err());
}

#[test]
fn extractor_is_frozen_and_seeded() {
    let x = random((1, 3, 8, 8), 7);
    let ex = small_extractor();
    assert_eq!(ex.embed(&x).unwrap(), ex.embed(&x).unwrap());
    assert_eq!(ex.embed(&x).unwrap(), small_extractor().embed(&x).unwrap());
    let other = FeatureExtractor::random(VggConfig::small(), None, 3, 12).unwrap();
    assert_ne!(ex.embed(&x).unwrap(), other.embed(&x).unwrap());
    assert_eq!(ex.layer_tag(), "conv2_2");
    assert_eq!(ex.provenance(), &Provenance::RandomSeeded { seed: 11 });
    // conv2_2 of a 16/32 network on 8x8 input after one pooling
    assert_eq!(ex.embed(&x).unwrap().dim(), (1, 32, 4, 4));
}

#[test]
fn extractor_layer_tags() {
    let cfg = VggConfig::vgg19();
    assert_eq!(cfg.deepest_tag(), "conv5_4");
    assert_eq!(cfg.parse_tag("conv3_4").unwrap(), (2, 3));
    for bad in ["conv6_1", "conv1_3", "conv0_1", "relu1_1", "conv1"] {
        assert!(cfg.parse_tag(bad).is_err(), "{bad}");
    }
    let ex = FeatureExtractor::random(VggConfig::small(), Some("conv1_1"), 3, 1).unwrap();
    assert_eq!(ex.embed(&random((1, 3, 8, 8), 1)).unwrap().dim(), (1, 16, 8, 8));
}

#[test]
fn extractor_pretrained_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = VggConfig::small();
    let seeded = FeatureExtractor::random(cfg.clone(), None, 3, 99).unwrap();
    // a bundle with the seeded weights stands in for a pretrained file
    let params = seeded.params().unwrap().to_vec();
    let path = dir.path().join("w.srt");
    crate::artifacts::save_bundle(&params, &path).unwrap();
    let loaded = FeatureExtractor::pretrained(&path, cfg, None).unwrap();
    let x = random((1, 3, 8, 8), 3);
    assert_eq!(loaded.embed(&x).unwrap(), seeded.embed(&x).unwrap());
    assert!(matches!(loaded.provenance(), Provenance::Pretrained { .. }));
    assert!(FeatureExtractor::pretrained(&path, VggConfig::vgg19(), None).is_err());

    let fallback = FeatureExtractor::resolve(Some(dir.path()), None, 3, 5).unwrap();
    assert_eq!(fallback.provenance(), &Provenance::RandomSeeded { seed: 5 });
}

#[test]
fn srgan_adv_examples() {
    assert!(srgan_adv(&[1.0]).unwrap() < 1e-6);
    assert_abs_diff_eq!(srgan_adv(&[0.5]).unwrap(), 0.5f64.ln().abs(), epsilon = 1e-12);
    assert_abs_diff_eq!(srgan_adv(&[0.5, 1.0]).unwrap(), 0.34657, epsilon = 1e-4);
    assert!(srgan_adv(&[0.0]).unwrap().is_finite());
    assert!(srgan_adv(&[1.5]).is_err());
    assert!(srgan_adv(&[f64::NAN]).is_err());
    assert!(srgan_adv(&[]).is_err());
}

#[test]
fn gan_discriminator_examples() {
    assert!(gan_discriminator_loss(&[1.0 - EPS], &[EPS]).unwrap() < 1e-6);
    assert_abs_diff_eq!(
        gan_discriminator_loss(&[0.5], &[0.5]).unwrap(),
        1.386294,
        epsilon = 1e-6
    );
    let real = random_vec(5, 0.01, 0.99, 1);
    let fake = random_vec(3, 0.01, 0.99, 2);
    let brute =
        real.iter().map(|p| -p.ln()).sum::<f64>() / 5.0 + fake.iter().map(|p| -(1.0 - p).ln()).sum::<f64>() / 3.0;
    assert_abs_diff_eq!(gan_discriminator_loss(&real, &fake).unwrap(), brute, epsilon = 1e-9);
    assert!(gan_discriminator_loss(&real, &[-0.1]).is_err());
}

#[test]
fn ragan_examples() {
    let c = ragan_losses(&[0.7; 4], &[0.7; 4]).unwrap();
    assert_abs_diff_eq!(c.disc, 1.386294, epsilon = 1e-6);
    assert_abs_diff_eq!(c.gen_adv, 1.386294, epsilon = 1e-6);

    let sat = ragan_losses(&[20.0; 4], &[-20.0; 4]).unwrap();
    assert!(sat.disc < 1e-6);
    assert!(sat.gen_adv > 30.0);

    assert!(ragan_losses(&[], &[1.0]).is_err());
    assert!(ragan_losses(&[f64::INFINITY], &[1.0]).is_err());
}

#[test]
fn srgan_composite() {
    let hr = random((1, 3, 8, 8), 8);
    let sr = random((1, 3, 8, 8), 9);
    let ex = small_extractor();
    let d = [0.3, 0.8];
    let separate = perceptual(&sr, &hr, &ex, Norm::L2).unwrap() + 1e-3 * srgan_adv(&d).unwrap();
    assert_abs_diff_eq!(
        srgan_generator_loss(&sr, &hr, &d, &ex).unwrap(),
        separate,
        epsilon = 1e-9
    );
    assert!(srgan_generator_loss(&hr, &hr, &[1.0 - EPS], &ex).unwrap() < 1e-9);
}

#[test]
fn esrgan_composite() {
    let hr = random((1, 3, 8, 8), 10);
    let sr = random((1, 3, 8, 8), 11);
    let ex = small_extractor();
    let (real, fake) = ([0.5, -0.2], [1.1, 0.4]);
    let w = LossWeights::default();
    assert_eq!((w.lambda_perc, w.lambda_adv, w.lambda_cont), (1.0, 5e-3, 1e-2));
    assert_abs_diff_eq!(w.lambda_perc + w.lambda_adv + w.lambda_cont, 1.015, epsilon = 1e-15);
    let separate = perceptual(&sr, &hr, &ex, Norm::L1).unwrap()
        + 5e-3 * ragan_losses(&real, &fake).unwrap().gen_adv
        + 1e-2 * content_l1(&sr, &hr).unwrap();
    let total = esrgan_generator_loss(&sr, &hr, &real, &fake, &ex, &w).unwrap();
    assert_abs_diff_eq!(total, separate, epsilon = 1e-9);

    let only_content = LossWeights {
        lambda_cont: 1.0,
        lambda_adv: 0.0,
        lambda_perc: 0.0,
    };
    assert_eq!(
        esrgan_generator_loss(&sr, &hr, &real, &fake, &ex, &only_content).unwrap(),
        content_l1(&sr, &hr).unwrap()
    );
    let zero = LossWeights {
        lambda_cont: 0.0,
        lambda_adv: 0.0,
        lambda_perc: 0.0,
    };
    assert!(esrgan_generator_loss(&sr, &hr, &real, &fake, &ex, &zero).is_err());
    let negative = LossWeights { lambda_adv: -1.0, ..w };
    assert!(negative.validate().is_err());
}

#[test]
fn gradients_of_image_losses() {
    let hr = random((2, 3, 8, 8), 20);
    let sr = random((2, 3, 8, 8), 21);
    let ex = small_extractor();

    let (_, g) = content_l1_grad(&sr, &hr).unwrap();
    check_tensor(|x| content_l1(x, &hr).unwrap(), &sr, &g);
    for norm in [Norm::L2, Norm::L1] {
        let (_, g) = perceptual_grad(&sr, &hr, &ex, norm).unwrap();
        check_tensor(|x| perceptual(x, &hr, &ex, norm).unwrap(), &sr, &g);
        let id = FeatureExtractor::identity();
        let (_, g) = perceptual_grad(&sr, &hr, &id, norm).unwrap();
        check_tensor(|x| perceptual(x, &hr, &id, norm).unwrap(), &sr, &g);
    }
}

#[test]
fn gradients_of_score_losses() {
    let probs = random_vec(4, 0.05, 0.95, 30);
    let other = random_vec(4, 0.05, 0.95, 31);
    let (_, g) = srgan_adv_grad(&probs).unwrap();
    check_vec(|p| srgan_adv(p).unwrap(), &probs, &g);

    let d = gan_discriminator_loss_grad(&probs, &other).unwrap();
    check_vec(|p| gan_discriminator_loss(p, &other).unwrap(), &probs, &d.wrt_real);
    check_vec(|p| gan_discriminator_loss(&probs, p).unwrap(), &other, &d.wrt_fake);

    let real = random_vec(4, -3.0, 3.0, 32);
    let fake = random_vec(4, -3.0, 3.0, 33);
    let rg = ragan_grads(&real, &fake).unwrap();
    check_vec(|r| ragan_losses(r, &fake).unwrap().gen_adv, &real, &rg.gen_wrt_real);
    check_vec(|f| ragan_losses(&real, f).unwrap().gen_adv, &fake, &rg.gen_wrt_fake);
    check_vec(|r| ragan_losses(r, &fake).unwrap().disc, &real, &rg.disc_wrt_real);
    check_vec(|f| ragan_losses(&real, f).unwrap().disc, &fake, &rg.disc_wrt_fake);
}

#[test]
fn gradients_of_composites() {
    let hr = random((1, 3, 8, 8), 40);
    let sr = random((1, 3, 8, 8), 41);
    let ex = small_extractor();
    let d = random_vec(4, 0.05, 0.95, 42);
    let sg = srgan_generator_loss_grad(&sr, &hr, &d, &ex).unwrap();
    check_tensor(|x| srgan_generator_loss(x, &hr, &d, &ex).unwrap(), &sr, &sg.wrt_sr);
    check_vec(|p| srgan_generator_loss(&sr, &hr, p, &ex).unwrap(), &d, &sg.wrt_d_prob);

    let real = random_vec(4, -2.0, 2.0, 43);
    let fake = random_vec(4, -2.0, 2.0, 44);
    let w = LossWeights::default();
    let eg = esrgan_generator_loss_grad(&sr, &hr, &real, &fake, &ex, &w).unwrap();
    check_tensor(
        |x| esrgan_generator_loss(x, &hr, &real, &fake, &ex, &w).unwrap(),
        &sr,
        &eg.wrt_sr,
    );
    check_vec(
        |r| esrgan_generator_loss(&sr, &hr, r, &fake, &ex, &w).unwrap(),
        &real,
        &eg.wrt_logits_real,
    );
    check_vec(
        |f| esrgan_generator_loss(&sr, &hr, &real, f, &ex, &w).unwrap(),
        &fake,
        &eg.wrt_logits_fake,
    );
}

#[test]
fn clamped_probabilities_have_zero_gradient() {
    let (v, g) = srgan_adv_grad(&[0.0, 1.0]).unwrap();
    assert!(v.is_finite());
    assert_eq!(g, vec![0.0, 0.0]);
}

proptest! {
    #[test]
    fn ragan_exchange_symmetry(
        a in prop::collection::vec(-10.0f64..10.0, 1..6),
        b in prop::collection::vec(-10.0f64..10.0, 1..6),
    ) {
        let ab = ragan_losses(&a, &b).unwrap();
        let ba = ragan_losses(&b, &a).unwrap();
        prop_assert_eq!(ab.disc, ba.gen_adv);
        prop_assert_eq!(ab.gen_adv, ba.disc);
    }

    #[test]
    fn losses_are_finite_and_nonnegative(
        p in prop::collection::vec(0.0f64..=1.0, 1..6),
        q in prop::collection::vec(0.0f64..=1.0, 1..6),
        z in prop::collection::vec(-50.0f64..50.0, 1..6),
    ) {
        let s = srgan_adv(&p).unwrap();
        prop_assert!(s.is_finite() && s >= 0.0);
        let d = gan_discriminator_loss(&p, &q).unwrap();
        prop_assert!(d.is_finite() && d >= 0.0);
        let r = ragan_losses(&z, &p).unwrap();
        prop_assert!(r.disc.is_finite() && r.disc >= 0.0);
        prop_assert!(r.gen_adv.is_finite() && r.gen_adv >= 0.0);
    }

    #[test]
    fn identical_images_have_zero_content_and_perceptual(seed in 0u64..1000) {
        let x = random((1, 3, 8, 8), seed);
        prop_assert_eq!(content_l1(&x, &x).unwrap(), 0.0);
        let ex = FeatureExtractor::random(VggConfig::small(), None, 3, seed).unwrap();
        prop_assert_eq!(perceptual(&x, &x, &ex, Norm::L1).unwrap(), 0.0);
        prop_assert_eq!(perceptual(&x, &x, &ex, Norm::L2).unwrap(), 0.0);
    }
}
