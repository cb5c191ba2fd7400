use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::AugmentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PsnrPretrain,
    Adversarial,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::PsnrPretrain => "psnr_pretrain",
            Phase::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs (counted from the start of this phase) after which the
    /// learning rate is divided by `decay_factor`.
    pub milestones: Vec<usize>,
    pub decay_factor: f64,
    pub seed: u64,
    pub phase: Phase,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 16,
            epochs: 300,
            milestones: Vec::new(),
            decay_factor: 2.0,
            seed: 0,
            phase: Phase::Adversarial,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Constant learning rate for 300 epochs.
    pub fn srgan() -> Self {
        Self::default()
    }

    /// L1 pretraining at a constant learning rate.
    pub fn esrgan_pretrain() -> Self {
        Self {
            epochs: 100,
            phase: Phase::PsnrPretrain,
            ..Self::default()
        }
    }

    /// Adversarial phase halving the learning rate after 25, 50, 100 and
    /// 150 epochs.
    pub fn esrgan_adversarial() -> Self {
        Self {
            milestones: vec![25, 50, 100, 150],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config(format!("lr0 {} must be positive", self.lr0)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} {b} must lie in [0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("milestones must be strictly increasing"));
        }
        if !(self.decay_factor >= 1.0 && self.decay_factor.is_finite()) {
            return Err(Error::config(format!(
                "decay_factor {} must be >= 1",
                self.decay_factor
            )));
        }
        self.augment.validate()
    }
}

/// `lr0 / decay_factor^k` where `k` counts the milestones `<= epoch`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let passed = cfg.milestones.iter().filter(|m| **m <= epoch).count();
    cfg.lr0 / cfg.decay_factor.powi(passed as i32)
}
