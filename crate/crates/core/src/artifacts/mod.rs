//! On-disk formats: checkpoints, run configuration, uncertainty sidecars
//! and rendered figures.

mod bundle;
mod checkpoint;
mod colormap;
mod config;
mod container;
mod render;
mod sidecar;

pub use bundle::{decode_bundle, encode_bundle, load_bundle, save_bundle};
pub use checkpoint::{sampler_from_checkpoints, Checkpoint, SamplerSpec, TrainingProvenance};
pub use colormap::INFERNO;
pub use config::{
    EnsembleSection, EvaluationSection, ExtractorSection, Family, Method, ModelSection, PathsSection, Preset,
    RunConfig, UncertaintySection,
};
pub use container::ParamEntry;
pub use render::{heatmap, render_overlay, render_panel, save_sigma_png, sigma_gray16, Rgb8, OVERLAY_ALPHA};
pub use sidecar::{SigmaSidecar, SIDECAR_MAGIC, SIDECAR_VERSION};

#[cfg(test)]
mod tests;
