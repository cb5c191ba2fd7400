use std::path::PathBuf;

use srunc_core::imaging::{
    center_origin, load_image, make_pair, save_image, scan_manifest, DatasetManifest, ManifestEntry,
};

use super::{create_dir, write_text, Failure};
use crate::PrepareArgs;

/// Writes `hr/<id>.png`, `lr/<id>.png`, `manifest.tsv` (pointing at the HR
/// crops) and `skipped.tsv`.
pub(super) fn run(args: &PrepareArgs) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&args.test_fraction) {
        return Err(Failure::Usage(format!(
            "--test-fraction {} outside [0, 1]",
            args.test_fraction
        )));
    }
    let scanned = scan_manifest(&args.input, args.scale, args.hr_size)?;
    let geom = scanned.geometry();
    create_dir(&args.out.join("hr"))?;
    create_dir(&args.out.join("lr"))?;
    let mut manifest = DatasetManifest::new(args.scale, args.hr_size)?;
    for entry in &scanned.entries {
        let img = load_image(&entry.path)?;
        let pair = make_pair(&img, center_origin(&img, args.hr_size)?, &geom, entry.source_id.clone())?;
        let name = format!("{}.png", entry.source_id);
        save_image(&pair.hr, args.out.join("hr").join(&name))?;
        save_image(&pair.lr, args.out.join("lr").join(&name))?;
        manifest.push(ManifestEntry {
            source_id: entry.source_id.clone(),
            path: PathBuf::from("hr").join(&name),
            split: entry.split,
        })?;
    }
    manifest.assign_splits(args.test_fraction);
    manifest.save(args.out.join("manifest.tsv"))?;

    let mut skipped = String::from("path\treason\n");
    for s in &scanned.skipped {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
        skipped.push_str(&format!(
            "{}\t{}\n",
            s.path.display(),
            s.reason.replace(['\t', '\n'], " ")
        ));
    }
    write_text(&args.out.join("skipped.tsv"), &skipped)?;
    if manifest.is_empty() {
        eprintln!("warning: no usable images in {}", args.input.display());
    }
    println!(
        "prepared {} pairs ({}px -> {}px), skipped {}",
        manifest.len(),
        args.hr_size,
        manifest.lr_size,
        scanned.skipped.len()
    );
    Ok(())
}
