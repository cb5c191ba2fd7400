//! Training objectives and their gradients.
//!
//! Every loss is mean-reduced over batch and elements. Each `*_grad`
//! variant returns the value together with the derivative with respect to
//! its image or score inputs, which the trainer feeds into the tape.
//! Probabilities are clamped to `[EPS, 1 - EPS]` before any logarithm; the
//! gradient is zero wherever the clamp is active.

mod adversarial;
mod composite;
mod perceptual;
mod pixel;

pub use adversarial::{
    gan_discriminator_loss, gan_discriminator_loss_grad, ragan_grads, ragan_losses, srgan_adv, srgan_adv_grad,
    GanDiscriminatorGrad, RaganGrads, RaganLosses,
};
pub use composite::{
    esrgan_generator_loss, esrgan_generator_loss_grad, srgan_generator_loss, srgan_generator_loss_grad,
    EsrganGeneratorGrad, GeneratorTerms, LossWeights, SrganGeneratorGrad, SRGAN_ADV_WEIGHT,
};
pub use perceptual::{perceptual, perceptual_grad, FeatureExtractor, Norm, Provenance, VggConfig, PRETRAINED_FILE};
pub use pixel::{content_l1, content_l1_grad};

pub const EPS: f64 = 1e-7;

#[cfg(test)]
mod tests;
