use srunc_core::artifacts::{render_overlay, render_panel, SigmaSidecar};
use srunc_core::imaging::load_image;

use super::Failure;
use crate::RenderArgs;

pub(super) fn run(args: &RenderArgs) -> Result<(), Failure> {
    if args.panel.is_some() && args.original.is_none() {
        return Err(Failure::Usage("--panel needs --original".into()));
    }
    let sr = load_image(&args.sr)?;
    let sidecar = SigmaSidecar::load(&args.sigma)?;
    let original = args.original.as_ref().map(load_image).transpose()?;
    if let Some(o) = &original {
        if (o.height(), o.width()) != (sr.height(), sr.width()) {
            return Err(Failure::Usage(format!(
                "original is {}x{} but the SR image is {}x{}",
                o.height(),
                o.width(),
                sr.height(),
                sr.width()
            )));
        }
    }
    let overlay = render_overlay(&sr, &sidecar)?;
    overlay.save(&args.out)?;
    println!("{}", args.out.display());
    if let (Some(panel_path), Some(o)) = (&args.panel, &original) {
        render_panel(o, &sr, &overlay)?.save(panel_path)?;
        println!("{}", panel_path.display());
    }
    Ok(())
}
