use proptest::prelude::*;

use srunc_core::artifacts::{Checkpoint, RunConfig, TrainingProvenance};
use srunc_core::evaluation::{evaluate_pairs, CalibrationCurve, CurveKind, EvalConfig, MetricReport};
use srunc_core::imaging::{synthetic_pairs, PairGeometry};
use srunc_core::training::run_recipe;
use srunc_core::uncertainty::{aggregate_mean, aggregate_std, McdSampler, SampleSource, SampleStack, StdMode};
use srunc_core::ImageTensor;

const CONFIG: &str = r#"
seed = 21
model.preset = "tiny"
pretrain.epochs = 3
pretrain.batch_size = 2
train.epochs = 1
train.batch_size = 2
"#;

#[test]
fn train_save_restore_and_evaluate() {
    let cfg = RunConfig::parse(CONFIG).unwrap();
    let recipe = cfg.recipe(None).unwrap();
    let geom = PairGeometry { hr_size: 16, scale: 4 };
    let train = synthetic_pairs(4, &geom, 1).unwrap();
    let test = synthetic_pairs(3, &geom, 2).unwrap();
    let run = run_recipe(&recipe, &train, cfg.seed).unwrap();
    assert_eq!(run.pretrain.as_ref().unwrap().records.len(), 3);
    assert_eq!(run.adversarial.as_ref().unwrap().records.len(), 1);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    let provenance = TrainingProvenance::from_report(run.last_report(), run.seed).unwrap();
    Checkpoint::of(&run.generator, provenance).save(&path).unwrap();
    let restored = Checkpoint::load(&path)
        .unwrap()
        .to_model_as(&cfg.generator_arch())
        .unwrap();

    let sampler = |model| McdSampler {
        model,
        samples: 4,
        seed: 5,
        sequential: false,
    };
    let eval = EvalConfig::default();
    let a = evaluate_pairs(&sampler(run.generator), &test, &eval).unwrap();
    let b = evaluate_pairs(&sampler(restored), &test, &eval).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.reports.len(), 3);
    assert!(a.reports.iter().all(|r| r.psnr_db.is_finite() && r.sigma_mean > 0.0));

    let csv = MetricReport::to_csv(&a.reports).unwrap();
    assert_eq!(MetricReport::from_csv(&csv).unwrap(), a.reports);
    let sweep = CalibrationCurve::from_csv(&a.sweep.to_csv().unwrap(), CurveKind::ThresholdSweep).unwrap();
    assert_eq!(sweep, a.sweep);
}

fn stack(values: &[f64]) -> SampleStack {
    let samples = values
        .iter()
        .map(|v| ImageTensor::constant(2, 2, 3, *v).unwrap())
        .collect();
    SampleStack::new(samples, SampleSource::Ensemble, Vec::new()).unwrap()
}

proptest! {
    #[test]
    fn aggregation_ignores_member_order(mut values in prop::collection::vec(0.0f64..=1.0, 1..8), rot in 0usize..8) {
        let before = stack(&values);
        let k = rot % values.len();
        values.rotate_left(k);
        values.reverse();
        let after = stack(&values);
        prop_assert_eq!(aggregate_mean(&before), aggregate_mean(&after));
        for mode in [StdMode::PaperEq7, StdMode::SampleStd] {
            let (x, y) = (aggregate_std(&before, mode), aggregate_std(&after, mode));
            prop_assert_eq!(x.sigma(), y.sigma());
        }
    }

    #[test]
    fn sigma_is_bounded_by_half_the_range(values in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let umap = aggregate_std(&stack(&values), StdMode::SampleStd);
        let lo = values.iter().cloned().fold(f64::MAX, f64::min);
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(umap.sigma().iter().all(|s| *s >= 0.0 && *s <= (hi - lo) / 2.0 + 1e-12));
    }
}
