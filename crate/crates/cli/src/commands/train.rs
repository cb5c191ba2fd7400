use std::path::{Path, PathBuf};

use srunc_core::artifacts::{Checkpoint, TrainingProvenance};
use srunc_core::imaging::{DatasetManifest, Split, TrainingPair};
use srunc_core::training::{run_recipe, train_ensemble, RunOutcome};

use super::{create_dir, required, write_text, Failure};
use crate::{Context, TrainArgs};

fn training_pairs(args: &TrainArgs, ctx: &Context) -> Result<Vec<TrainingPair>, Failure> {
    let path = required(
        args.data.as_ref().or(ctx.config.paths.data.as_ref()),
        "--data",
        "paths.data",
    )?;
    let manifest = DatasetManifest::load(&path)?.filter(Split::Train);
    if manifest.is_empty() {
        return Err(Failure::Usage(format!("{} has no training entries", path.display())));
    }
    if manifest.scale != ctx.config.generator.scale {
        return Err(Failure::Usage(format!(
            "manifest pairs are x{} but the generator upscales x{}",
            manifest.scale, ctx.config.generator.scale
        )));
    }
    Ok(manifest.load_pairs()?)
}

fn out_dir(args: &TrainArgs, ctx: &Context) -> Result<PathBuf, Failure> {
    let out = required(
        args.out.as_ref().or(ctx.config.paths.out.as_ref()),
        "--out",
        "paths.out",
    )?;
    create_dir(&out)?;
    Ok(out)
}

/// Writes checkpoints, per-phase metrics CSVs, the log and the resolved
/// config of one run; returns the generator checkpoint path and digest.
fn write_run(dir: &Path, run: &RunOutcome, ctx: &Context) -> Result<(PathBuf, String), Failure> {
    create_dir(dir)?;
    let provenance = TrainingProvenance::from_report(run.last_report(), run.seed)?;
    let gen = Checkpoint::of(&run.generator, provenance.clone());
    let gen_path = dir.join("generator.ckpt");
    gen.save(&gen_path)?;
    if let Some(d) = &run.discriminator {
        Checkpoint::of(d, provenance).save(&dir.join("discriminator.ckpt"))?;
    }
    let mut log = String::new();
    for report in [&run.pretrain, &run.adversarial].into_iter().flatten() {
        write_text(
            &dir.join(format!("metrics_{}.csv", report.phase.name())),
            &report.to_csv()?,
        )?;
        log.push_str(&report.to_log(!ctx.deterministic));
    }
    write_text(&dir.join("train.log"), &log)?;
    let mut resolved = ctx.config.clone();
    resolved.seed = run.seed;
    write_text(&dir.join("config.toml"), &resolved.to_toml()?)?;
    Ok((gen_path, gen.digest()?))
}

pub(super) fn run(args: &TrainArgs, ctx: &Context) -> Result<(), Failure> {
    let recipe = ctx.config.recipe(ctx.weights_dir.as_deref())?;
    let pairs = training_pairs(args, ctx)?;
    let out = out_dir(args, ctx)?;
    let outcome = run_recipe(&recipe, &pairs, ctx.config.seed)?;
    let (path, digest) = write_run(&out, &outcome, ctx)?;
    println!("{}\t{digest}", path.display());
    Ok(())
}

/// One `member_NN/` folder per seed plus `ensemble.tsv`
/// (`member, seed, checkpoint, sha256`).
pub(super) fn run_ensemble(args: &TrainArgs, ctx: &Context) -> Result<(), Failure> {
    let recipe = ctx.config.recipe(ctx.weights_dir.as_deref())?;
    let seeds = ctx.config.ensemble_seeds();
    let pairs = training_pairs(args, ctx)?;
    let out = out_dir(args, ctx)?;
    let runs = train_ensemble(&recipe, &pairs, &seeds, !ctx.deterministic)?;
    let mut index = String::from("member\tseed\tcheckpoint\tsha256\n");
    for (k, run) in runs.iter().enumerate() {
        let name = format!("member_{k:02}");
        let (_, digest) = write_run(&out.join(&name), run, ctx)?;
        index.push_str(&format!("{k}\t{}\t{name}/generator.ckpt\t{digest}\n", run.seed));
        println!("{}\t{digest}", out.join(&name).join("generator.ckpt").display());
    }
    write_text(&out.join("ensemble.tsv"), &index)
}
