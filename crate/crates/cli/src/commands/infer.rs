use srunc_core::artifacts::{save_sigma_png, Method, SigmaSidecar};
use srunc_core::imaging::{load_image, save_image};
use srunc_core::uncertainty::{aggregate_mean, aggregate_std};

use super::{create_dir, sampler, Failure};
use crate::{Context, InferArgs};

/// Writes `<stem>_sr.png`; methods with uncertainty add `<stem>_sigma.png`
/// (16-bit) and the raw `<stem>_sigma.srsd` sidecar.
pub(super) fn run(args: &InferArgs, ctx: &Context) -> Result<(), Failure> {
    let (method, sampler) = sampler(&args.sampling, ctx)?;
    let lr = load_image(&args.input)?;
    let stack = sampler.sample(&lr)?;
    let stem = args
        .input
        .file_stem()
        .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
    create_dir(&args.out)?;
    let sr_path = args.out.join(format!("{stem}_sr.png"));
    save_image(&aggregate_mean(&stack), &sr_path)?;
    println!("{}", sr_path.display());
    if matches!(method, Method::Mcd | Method::Ensemble) {
        let mode = args.sampling.mode.unwrap_or(ctx.config.uncertainty.mode);
        let umap = aggregate_std(&stack, mode);
        let sidecar = SigmaSidecar::of(&umap);
        let png = args.out.join(format!("{stem}_sigma.png"));
        let raw = args.out.join(format!("{stem}_sigma.srsd"));
        save_sigma_png(&sidecar, &png)?;
        sidecar.save(&raw)?;
        println!("{}\n{}\tsigma_mean={}", png.display(), raw.display(), umap.sigma_mean());
    }
    Ok(())
}
