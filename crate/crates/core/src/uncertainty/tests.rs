use approx::assert_abs_diff_eq;
use ndarray::Array3;
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::imaging::ImageTensor;
use crate::models::{build_esrgan_generator, build_srgan_generator, GeneratorConfig};
use crate::seed::rng;

fn random_image(h: usize, w: usize, seed: u64) -> ImageTensor {
    let mut r = rng(seed);
    ImageTensor::new(Array3::from_shape_simple_fn((h, w, 3), || r.random::<f64>())).unwrap()
}

fn random_stack(m: usize, seed: u64) -> SampleStack {
    let samples = (0..m).map(|i| random_image(8, 8, seed * 100 + i as u64)).collect();
    SampleStack::new(samples, SampleSource::Mcd, Vec::new()).unwrap()
}

/// Direct loops over pixels and samples.
fn oracle(stack: &SampleStack) -> (Array3<f64>, Array3<f64>, Array3<f64>) {
    let (h, w, c) = stack.dims();
    let m = stack.len() as f64;
    let mut mu = Array3::zeros((h, w, c));
    let mut eq7 = Array3::zeros((h, w, c));
    let mut pop = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                let mut s = 0.0;
                for y in stack.samples() {
                    s += y.data()[[i, j, k]];
                }
                let mean = s / m;
                let mut ss = 0.0;
                for y in stack.samples() {
                    ss += (y.data()[[i, j, k]] - mean).powi(2);
                }
                mu[[i, j, k]] = mean;
                eq7[[i, j, k]] = (ss / (m * m)).sqrt();
                pop[[i, j, k]] = (ss / m).sqrt();
            }
        }
    }
    (mu, eq7, pop)
}

fn tiny_srgan(p: f64) -> crate::Model {
    let cfg = GeneratorConfig {
        dropout_p: p,
        ..GeneratorConfig::tiny_srgan()
    };
    build_srgan_generator(cfg, 3).unwrap()
}

#[test]
fn matches_brute_force_oracle() {
    for (n, m) in [1usize, 2, 5, 10].into_iter().enumerate() {
        let stack = random_stack(m, n as u64 + 1);
        let (mu, eq7, pop) = oracle(&stack);
        let mean = aggregate_mean(&stack);
        let a = aggregate_std(&stack, StdMode::PaperEq7);
        let b = aggregate_std(&stack, StdMode::SampleStd);
        for idx in ndarray::indices(stack.dims()) {
            assert_abs_diff_eq!(mean.data()[idx], mu[idx], epsilon = 1e-7);
            assert_abs_diff_eq!(a.sigma()[idx], eq7[idx], epsilon = 1e-7);
            assert_abs_diff_eq!(b.sigma()[idx], pop[idx], epsilon = 1e-7);
            assert_abs_diff_eq!(a.sigma()[idx], b.sigma()[idx] / (m as f64).sqrt(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(a.sigma_mean(), eq7.mean().unwrap(), epsilon = 1e-12);
    }
}

#[test]
fn two_sample_closed_form() {
    let zero = ImageTensor::constant(1, 1, 1, 0.0).unwrap();
    let one = ImageTensor::constant(1, 1, 1, 1.0).unwrap();
    let stack = SampleStack::new(vec![zero, one], SampleSource::Ensemble, Vec::new()).unwrap();
    assert_eq!(aggregate_mean(&stack).data()[[0, 0, 0]], 0.5);
    assert_abs_diff_eq!(
        aggregate_std(&stack, StdMode::PaperEq7).sigma()[[0, 0, 0]],
        0.125f64.sqrt(),
        epsilon = 1e-15
    );
    assert_eq!(aggregate_std(&stack, StdMode::SampleStd).sigma()[[0, 0, 0]], 0.5);
}

#[test]
fn single_sample_is_exact() {
    let stack = random_stack(1, 9);
    assert_eq!(&aggregate_mean(&stack), &stack.samples()[0]);
    for mode in [StdMode::PaperEq7, StdMode::SampleStd] {
        let u = aggregate_std(&stack, mode);
        assert!(u.sigma().iter().all(|v| *v == 0.0));
        assert_eq!(u.sigma_mean(), 0.0);
    }
}

#[test]
fn stack_validation() {
    assert!(SampleStack::new(Vec::new(), SampleSource::Mcd, Vec::new()).is_err());
    let a = random_image(8, 8, 1);
    let b = random_image(8, 4, 2);
    assert!(SampleStack::new(vec![a, b], SampleSource::Mcd, Vec::new()).is_err());
}

#[test]
fn mcd_without_dropout_is_degenerate() {
    let gen = tiny_srgan(0.0);
    let lr = random_image(6, 6, 4);
    let stack = mc_dropout_sample(&gen, &lr, 4, 7).unwrap();
    assert_eq!(stack.len(), 4);
    assert!(stack.samples().iter().all(|s| s == &stack.samples()[0]));
    let u = aggregate_std(&stack, StdMode::PaperEq7);
    assert!(u.sigma().iter().all(|v| *v == 0.0));
}

#[test]
fn mcd_is_seeded() {
    let gen = tiny_srgan(0.1);
    let lr = random_image(6, 6, 5);
    let a = mc_dropout_sample(&gen, &lr, 3, 11).unwrap();
    let b = mc_dropout_sample(&gen, &lr, 3, 11).unwrap();
    assert_eq!(a, b);
    let seq = sample::mc_dropout_sample_with(&gen, &lr, 3, 11, true).unwrap();
    assert_eq!(a, seq);
    assert_eq!(a.seeds().len(), 3);
    assert_ne!(a.samples()[0], a.samples()[1]);
    assert_ne!(a, mc_dropout_sample(&gen, &lr, 3, 12).unwrap());
    assert!(aggregate_std(&a, StdMode::SampleStd).sigma_mean() > 0.0);
    assert!(mc_dropout_sample(&gen, &lr, 0, 11).is_err());
}

#[test]
fn ensemble_of_identical_members_is_degenerate() {
    let cfg = GeneratorConfig::tiny_esrgan();
    let gen = build_esrgan_generator(cfg.clone(), 5).unwrap();
    let members = vec![gen.clone(), gen.clone(), gen];
    let lr = random_image(6, 6, 6);
    let stack = ensemble_sample(&members, &lr).unwrap();
    assert_eq!(stack.len(), 3);
    assert_eq!(stack.dims(), (24, 24, 3));
    let u = aggregate_std(&stack, StdMode::PaperEq7);
    assert!(u.sigma().iter().all(|v| *v == 0.0));

    let other = build_esrgan_generator(cfg, 6).unwrap();
    let a = ensemble_sample(&[members[0].clone(), other.clone()], &lr).unwrap();
    let b = ensemble_sample(&[other, members[0].clone()], &lr).unwrap();
    assert_eq!(a.samples()[0], b.samples()[1]);
    assert_eq!(a.samples()[1], b.samples()[0]);
    assert_eq!(aggregate_mean(&a), aggregate_mean(&b));
    assert!(ensemble_sample(&[], &lr).is_err());
}

#[test]
fn samplers() {
    let lr = random_image(5, 5, 8);
    let id = IdentitySampler.sample(&lr).unwrap();
    assert_eq!(id.samples(), std::slice::from_ref(&lr));
    let single = SingleSampler { model: tiny_srgan(0.1) };
    let s = single.sample(&lr).unwrap();
    assert_eq!(s.len(), 1);
    // dropout is inactive for a single deterministic forward
    assert_eq!(s, single.sample(&lr).unwrap());
    assert_eq!(single.scale(), 4);
}

#[test]
fn std_mode_names() {
    for mode in [StdMode::PaperEq7, StdMode::SampleStd] {
        assert_eq!(mode.name().parse::<StdMode>().unwrap(), mode);
        assert_eq!(StdMode::from_code(mode.code()), Some(mode));
    }
    assert_eq!(StdMode::default(), StdMode::PaperEq7);
    assert!("std".parse::<StdMode>().is_err());
}

fn shuffled(stack: &SampleStack, perm: &[usize]) -> SampleStack {
    let samples = perm.iter().map(|&i| stack.samples()[i].clone()).collect();
    SampleStack::new(samples, stack.source(), Vec::new()).unwrap()
}

proptest! {
    #[test]
    fn permutation_invariance(seed in 0u64..500, m in 1usize..7, rot in 0usize..7) {
        let stack = random_stack(m, seed);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.rotate_left(rot % m);
        perm.swap(0, m - 1);
        let other = shuffled(&stack, &perm);
        prop_assert_eq!(aggregate_mean(&stack), aggregate_mean(&other));
        for mode in [StdMode::PaperEq7, StdMode::SampleStd] {
            prop_assert_eq!(aggregate_std(&stack, mode), aggregate_std(&other, mode));
        }
    }

    #[test]
    fn identical_samples_have_zero_sigma(seed in 0u64..500, m in 1usize..8) {
        let img = random_image(4, 4, seed);
        let stack = SampleStack::new(vec![img.clone(); m], SampleSource::Ensemble, Vec::new()).unwrap();
        prop_assert_eq!(aggregate_mean(&stack), img);
        prop_assert!(aggregate_std(&stack, StdMode::SampleStd).sigma().iter().all(|v| *v == 0.0));
        prop_assert!(aggregate_std(&stack, StdMode::PaperEq7).sigma().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn homogeneity(seed in 0u64..500, m in 1usize..6, c in 0.0f64..=1.0) {
        let stack = random_stack(m, seed);
        let scaled: Vec<_> = stack
            .samples()
            .iter()
            .map(|s| ImageTensor::new(s.data() * c).unwrap())
            .collect();
        let scaled = SampleStack::new(scaled, SampleSource::Mcd, Vec::new()).unwrap();
        for mode in [StdMode::PaperEq7, StdMode::SampleStd] {
            let a = aggregate_std(&stack, mode);
            let b = aggregate_std(&scaled, mode);
            for (x, y) in a.sigma().iter().zip(b.sigma().iter()) {
                prop_assert!((c * x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eq7_is_sample_std_over_sqrt_m(seed in 0u64..500, m in 1usize..11) {
        let stack = random_stack(m, seed);
        let a = aggregate_std(&stack, StdMode::PaperEq7);
        let b = aggregate_std(&stack, StdMode::SampleStd);
        for (x, y) in a.sigma().iter().zip(b.sigma().iter()) {
            prop_assert!((x - y / (m as f64).sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_of_partition_means(seed in 0u64..500, m in 2usize..9, split in 1usize..8) {
        let split = 1 + split % (m - 1);
        let stack = random_stack(m, seed);
        let left = SampleStack::new(stack.samples()[..split].to_vec(), SampleSource::Mcd, Vec::new()).unwrap();
        let right = SampleStack::new(stack.samples()[split..].to_vec(), SampleSource::Mcd, Vec::new()).unwrap();
        let (l, r, all) = (aggregate_mean(&left), aggregate_mean(&right), aggregate_mean(&stack));
        let (wl, wr) = (split as f64 / m as f64, (m - split) as f64 / m as f64);
        for idx in ndarray::indices(stack.dims()) {
            let combined = wl * l.data()[idx] + wr * r.data()[idx];
            prop_assert!((combined - all.data()[idx]).abs() <= 1e-12);
        }
    }
}
