use srunc_core::evaluation::{evaluate_set, MetricReport};
use srunc_core::imaging::{DatasetManifest, Split};

use super::{create_dir, required, sampler, write_text, Failure};
use crate::{Context, EvalArgs};

/// `evaluate` writes `metrics.csv` and `calibration_binned.csv`;
/// `calibrate` writes `calibration_sweep.csv` and `calibration_binned.csv`.
pub(super) fn run(args: &EvalArgs, ctx: &Context, sweep: bool) -> Result<(), Failure> {
    let (_, sampler) = sampler(&args.sampling, ctx)?;
    let path = required(
        args.data.as_ref().or(ctx.config.paths.data.as_ref()),
        "--data",
        "paths.data",
    )?;
    let manifest = DatasetManifest::load(&path)?;
    let manifest = match args.split.as_str() {
        "all" => manifest,
        "train" => manifest.filter(Split::Train),
        "test" => manifest.filter(Split::Test),
        other => return Err(Failure::Usage(format!("unknown split {other:?} (train, test, all)"))),
    };
    let mode = args.sampling.mode.unwrap_or(ctx.config.uncertainty.mode);
    let mut cfg = ctx.config.evaluation.eval_config(mode);
    cfg.n_bins = args.bins.unwrap_or(cfg.n_bins);
    cfg.n_thresholds = args.thresholds.unwrap_or(cfg.n_thresholds);
    let outcome = evaluate_set(sampler.as_ref(), &manifest, &cfg)?;
    create_dir(&args.out)?;
    write_text(&args.out.join("calibration_binned.csv"), &outcome.curve.to_csv()?)?;
    if sweep {
        write_text(&args.out.join("calibration_sweep.csv"), &outcome.sweep.to_csv()?)?;
    } else {
        write_text(&args.out.join("metrics.csv"), &MetricReport::to_csv(&outcome.reports)?)?;
    }
    let s = outcome.summary;
    println!(
        "images={} psnr_db={} ssim={} mae={} sigma_mean={}",
        s.count, s.psnr_db, s.ssim, s.mae, s.sigma_mean
    );
    Ok(())
}
