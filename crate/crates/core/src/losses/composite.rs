use serde::{Deserialize, Serialize};

use super::adversarial::{ragan_grads, srgan_adv_grad};
use super::perceptual::{perceptual_grad, FeatureExtractor, Norm};
use super::pixel::content_l1_grad;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Weight of the adversarial term in the SRGAN generator objective.
pub const SRGAN_ADV_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_cont: f64,
    pub lambda_adv: f64,
    pub lambda_perc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cont: 1e-2,
            lambda_adv: 5e-3,
            lambda_perc: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.lambda_cont, self.lambda_adv, self.lambda_perc];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("loss weights must be finite and non-negative"));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::config("at least one loss weight must be positive"));
        }
        Ok(())
    }
}

/// Unweighted components of a generator objective, for logging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeneratorTerms {
    pub total: f64,
    pub content: f64,
    pub perceptual: f64,
    pub adversarial: f64,
}

pub struct SrganGeneratorGrad {
    pub terms: GeneratorTerms,
    pub wrt_sr: Tensor,
    pub wrt_d_prob: Vec<f64>,
}

/// `perceptual(L2) + 1e-3 * srgan_adv`.
pub fn srgan_generator_loss(sr: &Tensor, hr: &Tensor, d_prob_sr: &[f64], extractor: &FeatureExtractor) -> Result<f64> {
    Ok(srgan_generator_loss_grad(sr, hr, d_prob_sr, extractor)?.terms.total)
}

pub fn srgan_generator_loss_grad(
    sr: &Tensor,
    hr: &Tensor,
    d_prob_sr: &[f64],
    extractor: &FeatureExtractor,
) -> Result<SrganGeneratorGrad> {
    let (perc, g_perc) = perceptual_grad(sr, hr, extractor, Norm::L2)?;
    let (adv, g_adv) = srgan_adv_grad(d_prob_sr)?;
    Ok(SrganGeneratorGrad {
        terms: GeneratorTerms {
            total: perc + SRGAN_ADV_WEIGHT * adv,
            content: 0.0,
            perceptual: perc,
            adversarial: adv,
        },
        wrt_sr: g_perc,
        wrt_d_prob: g_adv.iter().map(|g| SRGAN_ADV_WEIGHT * g).collect(),
    })
}

pub struct EsrganGeneratorGrad {
    pub terms: GeneratorTerms,
    pub wrt_sr: Tensor,
    pub wrt_logits_real: Vec<f64>,
    pub wrt_logits_fake: Vec<f64>,
}

/// `lambda_perc * perceptual(L1) + lambda_adv * gen_adv + lambda_cont * content_l1`.
pub fn esrgan_generator_loss(
    sr: &Tensor,
    hr: &Tensor,
    logits_real: &[f64],
    logits_fake: &[f64],
    extractor: &FeatureExtractor,
    w: &LossWeights,
) -> Result<f64> {
    Ok(
        esrgan_generator_loss_grad(sr, hr, logits_real, logits_fake, extractor, w)?
            .terms
            .total,
    )
}

pub fn esrgan_generator_loss_grad(
    sr: &Tensor,
    hr: &Tensor,
    logits_real: &[f64],
    logits_fake: &[f64],
    extractor: &FeatureExtractor,
    w: &LossWeights,
) -> Result<EsrganGeneratorGrad> {
    w.validate()?;
    let (perc, g_perc) = perceptual_grad(sr, hr, extractor, Norm::L1)?;
    let (cont, g_cont) = content_l1_grad(sr, hr)?;
    let rg = ragan_grads(logits_real, logits_fake)?;
    let adv = rg.losses.gen_adv;
    let mut wrt_sr = g_perc * w.lambda_perc;
    wrt_sr.scaled_add(w.lambda_cont, &g_cont);
    let scale = |v: Vec<f64>| v.into_iter().map(|g| w.lambda_adv * g).collect();
    Ok(EsrganGeneratorGrad {
        terms: GeneratorTerms {
            total: w.lambda_perc * perc + w.lambda_adv * adv + w.lambda_cont * cont,
            content: cont,
            perceptual: perc,
            adversarial: adv,
        },
        wrt_sr,
        wrt_logits_real: scale(rg.gen_wrt_real),
        wrt_logits_fake: scale(rg.gen_wrt_fake),
    })
}
