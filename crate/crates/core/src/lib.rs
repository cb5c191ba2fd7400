//! Uncertainty-aware super-resolution.
//!
//! SRGAN- and ESRGAN-style 4x upscalers trained with a small deterministic
//! reverse-mode tape, plus Monte-Carlo dropout and deep-ensemble sampling
//! that turn a single low-resolution input into a mean prediction and a
//! per-pixel standard-deviation map. The `evaluation` module measures image
//! quality (PSNR, SSIM, MAE) and how well the uncertainty tracks the error.

pub mod artifacts;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod losses;
pub mod models;
pub mod nn;
pub mod seed;
pub mod training;
pub mod uncertainty;

pub use error::{Error, Result};
pub use imaging::ImageTensor;
pub use models::{Architecture, DiscriminatorConfig, GeneratorConfig, Model};
pub use nn::Tensor;
