//! Optimization: Adam, milestone learning-rate decay, L1 pretraining,
//! alternating adversarial training and ensemble orchestration.
//!
//! Each run draws data order, augmentation and dropout masks from separate
//! streams derived from the run seed, and performs all updates
//! sequentially, so a run is reproducible bit for bit.

mod adam;
mod config;
mod gan;
mod recipe;
mod report;

pub use adam::Adam;
pub use config::{lr_at, Phase, TrainConfig};
pub use gan::{pretrain_psnr, train_gan, GanLosses, GanTrained, Trained};
pub use recipe::{run_recipe, train_ensemble, Recipe, RunOutcome};
pub use report::{EpochRecord, TrainReport};
