use ndarray::Array3;

use super::*;
use crate::error::Error;
use crate::imaging::ImageTensor;
use crate::models::{Architecture, GeneratorConfig, Model};
use crate::uncertainty::{StdMode, UncertaintyMap};

fn tiny_esrgan(seed: u64) -> Model {
    Model::build(Architecture::EsrganGenerator(GeneratorConfig::tiny_esrgan()), seed).unwrap()
}

fn provenance() -> TrainingProvenance {
    TrainingProvenance {
        phase: Some(crate::training::Phase::Adversarial),
        epoch: 3,
        seed: 7,
        loss_digest: Some("ab".repeat(32)),
    }
}

#[test]
fn checkpoint_roundtrip_is_byte_identical() {
    let m = tiny_esrgan(3);
    let bytes = Checkpoint::of(&m, provenance()).to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes().unwrap(), bytes);
    assert_eq!(back.provenance, provenance());
    assert_eq!(back.dropout_positions, m.dropout_positions());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    back.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(
        Checkpoint::load(&path).unwrap().digest().unwrap(),
        back.digest().unwrap()
    );
}

#[test]
fn restored_model_is_bit_identical() {
    let m = tiny_esrgan(4);
    let restored = Checkpoint::from_bytes(&Checkpoint::of(&m, provenance()).to_bytes().unwrap())
        .unwrap()
        .to_model()
        .unwrap();
    let x = crate::nn::Tensor::from_shape_fn((1, 3, 6, 5), |(_, c, y, x)| ((c + 2 * y + 3 * x) % 7) as f64 / 7.0);
    assert_eq!(m.forward(&x, None).unwrap(), restored.forward(&x, None).unwrap());
}

#[test]
fn checkpoint_rejects_mismatch_and_corruption() {
    let ck = Checkpoint::of(&tiny_esrgan(1), TrainingProvenance::untrained(1));
    let other = Architecture::EsrganGenerator(GeneratorConfig {
        n_blocks: 3,
        ..GeneratorConfig::tiny_esrgan()
    });
    assert!(matches!(ck.to_model_as(&other), Err(Error::Checkpoint(_))));
    assert!(ck.to_model_as(&ck.architecture.clone()).is_ok());

    let mut wrong = ck.clone();
    wrong.architecture = other;
    assert!(matches!(wrong.to_model(), Err(Error::Checkpoint(_))));
    let mut moved = ck.clone();
    moved.dropout_positions = vec![0, 0];
    assert!(matches!(moved.to_model(), Err(Error::Checkpoint(_))));

    let bytes = ck.to_bytes().unwrap();
    let mut bad = bytes.clone();
    bad[0] ^= 1;
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
    assert!(matches!(
        Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
        Err(Error::Checkpoint(_))
    ));
    assert!(matches!(decode_bundle(&bytes), Err(Error::Checkpoint(_))));
}

fn map(h: usize, w: usize, c: usize, f: impl Fn(usize, usize, usize) -> f64) -> UncertaintyMap {
    UncertaintyMap::from_sigma(
        Array3::from_shape_fn((h, w, c), |(y, x, k)| f(y, x, k)),
        StdMode::SampleStd,
        5,
    )
    .unwrap()
}

#[test]
fn sidecar_layout_and_roundtrip() {
    let m = map(2, 3, 3, |y, x, k| (y * 9 + x * 3 + k) as f64 * 0.01);
    let sc = SigmaSidecar::of(&m);
    let bytes = sc.to_bytes();
    assert_eq!(bytes.len(), 32 + 4 * 18);
    let words: Vec<u32> = bytes[..32]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert_eq!(words, vec![SIDECAR_MAGIC, SIDECAR_VERSION, 2, 3, 3, 1, 5, 0]);
    assert_eq!(&bytes[..4], b"SRSD");
    assert_eq!(
        f32::from_le_bytes(bytes[32 + 4 * 5..32 + 4 * 6].try_into().unwrap()),
        0.05f32
    );
    assert_eq!(SigmaSidecar::from_bytes(&bytes).unwrap(), sc);
    assert!(SigmaSidecar::from_bytes(&bytes[..bytes.len() - 4]).is_err());
    let mut bad_mode = bytes.clone();
    bad_mode[20] = 9;
    assert!(SigmaSidecar::from_bytes(&bad_mode).is_err());
}

#[test]
fn gray16_is_linear_over_zero_to_max() {
    let sc = SigmaSidecar::of(&map(1, 4, 1, |_, x, _| [0.0, 0.1, 0.2, 0.4][x]));
    assert_eq!(sigma_gray16(&sc), vec![0, 16384, 32768, 65535]);
    let zero = SigmaSidecar::of(&map(2, 2, 3, |_, _, _| 0.0));
    assert!(sigma_gray16(&zero).iter().all(|v| *v == 0));
}

#[test]
fn colormap_is_a_dark_to_light_ramp() {
    assert_eq!(INFERNO[0], [0, 0, 4]);
    assert_eq!(INFERNO[255], [252, 255, 164]);
    let luma = |c: [u8; 3]| 0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]);
    assert!(INFERNO.windows(2).all(|w| luma(w[1]) >= luma(w[0]) - 1.0));
}

#[test]
fn zero_sigma_overlay_is_uniform_blend() {
    let sr = ImageTensor::from_fn(4, 5, 3, |(y, x, c)| ((y + x + c) % 4) as f64 / 4.0).unwrap();
    let sc = SigmaSidecar::of(&map(4, 5, 3, |_, _, _| 0.0));
    let out = render_overlay(&sr, &sc).unwrap();
    for y in 0..4 {
        for x in 0..5 {
            let p = out.pixel(y, x);
            for c in 0..3 {
                let base = f64::from(crate::imaging::to_u8(sr.data()[[y, x, c]]));
                assert_eq!(p[c], (0.5 * base + 0.5 * f64::from(INFERNO[0][c])).round() as u8);
            }
        }
    }
}

#[test]
fn single_hot_pixel_is_the_only_maximal_color() {
    let sr = ImageTensor::constant(6, 6, 3, 0.5).unwrap();
    let sc = SigmaSidecar::of(&map(6, 6, 3, |y, x, _| if (y, x) == (2, 4) { 0.3 } else { 0.01 }));
    let heat = heatmap(&sc);
    let hot: Vec<_> = (0..36).filter(|i| heat.pixel(i / 6, i % 6) == INFERNO[255]).collect();
    assert_eq!(hot, vec![2 * 6 + 4]);
    let out = render_overlay(&sr, &sc).unwrap();
    let top = (0..36)
        .map(|i| out.pixel(i / 6, i % 6))
        .max_by_key(|p| p.iter().map(|v| *v as u32).sum::<u32>())
        .unwrap();
    let count = (0..36).filter(|i| out.pixel(i / 6, i % 6) == top).count();
    assert_eq!(count, 1);
    assert_eq!(out.pixel(2, 4), top);
}

#[test]
fn renders_are_deterministic_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let sr = ImageTensor::from_fn(8, 8, 3, |(y, x, _)| (y * x) as f64 / 64.0).unwrap();
    let sc = SigmaSidecar::of(&map(8, 8, 3, |y, x, _| (y + x) as f64 / 100.0));
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    render_overlay(&sr, &sc).unwrap().save(&a).unwrap();
    render_overlay(&sr, &sc).unwrap().save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let small = SigmaSidecar::of(&map(4, 8, 3, |_, _, _| 0.0));
    assert!(matches!(render_overlay(&sr, &small), Err(Error::Shape(_))));
    let panel = render_panel(&sr, &sr, &render_overlay(&sr, &sc).unwrap()).unwrap();
    assert_eq!((panel.width, panel.height), (24, 8));
    assert_eq!(panel.pixel(3, 2), panel.pixel(3, 10));
}

#[test]
fn empty_config_is_the_esrgan_preset() {
    let c = RunConfig::parse("").unwrap();
    assert_eq!(c, RunConfig::preset(Family::Esrgan, Preset::Full));
    assert_eq!(c.train.milestones, vec![25, 50, 100, 150]);
    assert_eq!(c.ensemble_seeds(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn sections_merge_onto_presets() {
    let text = r#"
seed = 9
model.family = "esrgan"
model.preset = "tiny"
train.lr0 = 2e-4
train.augment.p_rotate = 0.0
generator.dropout_p = 0.2

[pretrain]
epochs = 4
lr0 = 1e-3

[uncertainty]
method = "ensemble"
mode = "sample_std"
"#;
    let c = RunConfig::parse(text).unwrap();
    assert_eq!(c.generator.base_channels, 16);
    assert_eq!(c.generator.dropout_p, 0.2);
    assert_eq!(c.train.lr0, 2e-4);
    assert_eq!(c.train.augment.p_rotate, 0.0);
    assert_eq!(c.train.augment.p_hflip, 0.5);
    assert_eq!(c.train.milestones, vec![25, 50, 100, 150]);
    assert_eq!(c.pretrain.as_ref().unwrap().epochs, 4);
    assert_eq!(c.uncertainty.method, Method::Ensemble);
    assert_eq!(c.uncertainty.mode, StdMode::SampleStd);
    assert_eq!(c.ensemble_seeds(), vec![9, 10, 11, 12, 13]);
    assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);

    let srgan = RunConfig::parse("model.family = \"srgan\"").unwrap();
    assert!(srgan.pretrain.is_none());
    assert_eq!(RunConfig::parse(&srgan.to_toml().unwrap()).unwrap(), srgan);
    let no_pre = RunConfig::parse("pretrain.epochs = 0").unwrap();
    assert!(no_pre.pretrain.is_none());
}

#[test]
fn bad_configs_name_the_field() {
    let msg = |t: &str| match RunConfig::parse(t) {
        Err(Error::Config(m)) => m,
        other => panic!("{t:?} gave {other:?}"),
    };
    assert!(msg("train.learning_rate = 1.0").contains("learning_rate"));
    assert!(msg("bogus = 1").contains("bogus"));
    assert!(msg("[uncertainty]\nmethod = \"dropout\"").contains("dropout"));
    assert!(msg("train.lr0 = -1.0").starts_with("train"));
    assert!(msg("ensemble.seeds = [1, 2, 1]").contains("ensemble.seeds"));
    assert!(msg("generator.scale = 3").starts_with("generator"));
    assert!(msg("discriminator.image_channels = 1").contains("image_channels"));
    assert!(msg("evaluation.n_thresholds = 1").contains("n_thresholds"));
    assert!(msg("loss.lambda_adv = -1.0").starts_with("loss"));
}

#[test]
fn recipe_uses_random_extractor_without_weights() {
    let c = RunConfig::parse("model.preset = \"tiny\"").unwrap();
    let r = c.recipe(None).unwrap();
    assert!(matches!(
        r.losses.extractor.provenance(),
        crate::losses::Provenance::RandomSeeded { .. }
    ));
    assert!(r.pretrain.is_some() && r.adversarial.is_some());
}

#[test]
fn sampler_construction_checks_method_and_checkpoints() {
    let ck = |seed| Checkpoint::of(&tiny_esrgan(seed), TrainingProvenance::untrained(seed));
    let spec = |method| SamplerSpec {
        method,
        samples: 3,
        seed: 1,
        sequential: true,
        expected: None,
    };
    assert!(sampler_from_checkpoints(&[ck(1)], spec(Method::Single)).is_ok());
    assert!(sampler_from_checkpoints(&[ck(1)], spec(Method::Mcd)).is_ok());
    assert!(sampler_from_checkpoints(&[ck(1), ck(2)], spec(Method::Ensemble)).is_ok());
    assert!(sampler_from_checkpoints(&[], spec(Method::Identity)).is_ok());
    for (cks, m) in [
        (vec![ck(1)], Method::Ensemble),
        (vec![ck(1), ck(2)], Method::Single),
        (vec![ck(1), ck(2)], Method::Mcd),
        (vec![ck(1)], Method::Identity),
    ] {
        assert!(
            matches!(sampler_from_checkpoints(&cks, spec(m)), Err(Error::Config(_))),
            "{m:?}"
        );
    }
    let no_dropout = Model::build(
        Architecture::EsrganGenerator(GeneratorConfig {
            dropout_p: 0.0,
            ..GeneratorConfig::tiny_esrgan()
        }),
        1,
    )
    .unwrap();
    let c = Checkpoint::of(&no_dropout, TrainingProvenance::untrained(1));
    assert!(matches!(
        sampler_from_checkpoints(&[c], spec(Method::Mcd)),
        Err(Error::Config(_))
    ));
    let other = Architecture::SrganGenerator(GeneratorConfig::tiny_srgan());
    let wrong = SamplerSpec {
        expected: Some(&other),
        ..spec(Method::Single)
    };
    assert!(matches!(
        sampler_from_checkpoints(&[ck(1)], wrong),
        Err(Error::Checkpoint(_))
    ));
}
