use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_channels() -> usize {
    3
}

/// Generator hyperparameters. The RDB fields only matter for ESRGAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub scale: usize,
    pub base_channels: usize,
    pub n_blocks: usize,
    pub rdb_per_rrdb: usize,
    pub convs_per_rdb: usize,
    pub growth_channels: usize,
    pub residual_scale: f64,
    pub dropout_count: usize,
    pub dropout_p: f64,
    #[serde(default = "default_channels")]
    pub image_channels: usize,
}

impl GeneratorConfig {
    /// 16 residual blocks, 64 features, 4 dropout layers at p = 0.1.
    pub fn srgan() -> Self {
        Self {
            scale: 4,
            base_channels: 64,
            n_blocks: 16,
            rdb_per_rrdb: 0,
            convs_per_rdb: 0,
            growth_channels: 0,
            residual_scale: 1.0,
            dropout_count: 4,
            dropout_p: 0.1,
            image_channels: 3,
        }
    }

    /// 16 RRDBs of 3 RDBs x 5 convs, growth 32, beta 0.2, 5 dropout layers.
    pub fn esrgan() -> Self {
        Self {
            scale: 4,
            base_channels: 64,
            n_blocks: 16,
            rdb_per_rrdb: 3,
            convs_per_rdb: 5,
            growth_channels: 32,
            residual_scale: 0.2,
            dropout_count: 5,
            dropout_p: 0.1,
            image_channels: 3,
        }
    }

    /// Two RRDBs at width 16, small enough to train on a laptop CPU.
    pub fn tiny_esrgan() -> Self {
        Self {
            base_channels: 16,
            n_blocks: 2,
            growth_channels: 8,
            dropout_count: 2,
            ..Self::esrgan()
        }
    }

    pub fn tiny_srgan() -> Self {
        Self {
            base_channels: 16,
            n_blocks: 4,
            ..Self::srgan()
        }
    }

    pub fn upsample_stages(&self) -> usize {
        self.scale.trailing_zeros() as usize
    }

    pub fn validate(&self, esrgan: bool) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.scale == 0 || !self.scale.is_power_of_two() {
            return bad(format!("scale {} is not a power of two", self.scale));
        }
        if self.base_channels == 0 || self.n_blocks == 0 {
            return bad("base_channels and n_blocks must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if self.dropout_count > self.n_blocks {
            return bad(format!(
                "dropout_count {} exceeds n_blocks {}",
                self.dropout_count, self.n_blocks
            ));
        }
        if self.image_channels != 1 && self.image_channels != 3 {
            return bad(format!("image_channels {} not in {{1, 3}}", self.image_channels));
        }
        if esrgan {
            if self.rdb_per_rrdb == 0 || self.convs_per_rdb == 0 {
                return bad("rdb_per_rrdb and convs_per_rdb must be positive".into());
            }
            if self.convs_per_rdb > 1 && self.growth_channels == 0 {
                return bad("growth_channels must be positive".into());
            }
            if !self.residual_scale.is_finite() {
                return bad("residual_scale must be finite".into());
            }
        }
        Ok(())
    }

    /// Closed-form parameter count of the SRGAN generator.
    pub fn srgan_param_count(&self) -> usize {
        let (c, f) = (self.image_channels, self.base_channels);
        let conv = |cin: usize, cout: usize, k: usize| cin * cout * k * k + cout;
        let head = conv(c, f, 9) + 1;
        let block = 2 * conv(f, f, 3) + 1;
        let body = conv(f, f, 3);
        let ups = self.upsample_stages() * (conv(f, 4 * f, 3) + 1);
        head + self.n_blocks * block + body + ups + conv(f, c, 9)
    }

    /// Closed-form parameter count of the ESRGAN generator.
    pub fn esrgan_param_count(&self) -> usize {
        let (c, f, g) = (self.image_channels, self.base_channels, self.growth_channels);
        let conv = |cin: usize, cout: usize| cin * cout * 9 + cout;
        let k = self.convs_per_rdb;
        let rdb: usize = (1..k).map(|i| conv(f + (i - 1) * g, g)).sum::<usize>() + conv(f + (k - 1) * g, f);
        let rrdb = self.rdb_per_rrdb * rdb;
        conv(c, f)
            + self.n_blocks * rrdb
            + conv(f, f)
            + self.upsample_stages() * conv(f, 4 * f)
            + conv(f, f)
            + conv(f, c)
    }
}

/// Discriminator hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    pub n_stages: usize,
    pub relativistic: bool,
    #[serde(default = "default_channels")]
    pub image_channels: usize,
}

impl DiscriminatorConfig {
    pub fn srgan() -> Self {
        Self {
            base_channels: 64,
            n_stages: 4,
            relativistic: false,
            image_channels: 3,
        }
    }

    pub fn esrgan() -> Self {
        Self {
            relativistic: true,
            ..Self::srgan()
        }
    }

    /// Width 8, three stages; pairs with the tiny generators.
    pub fn tiny(relativistic: bool) -> Self {
        Self {
            base_channels: 8,
            n_stages: 3,
            relativistic,
            image_channels: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 || self.base_channels == 0 {
            return Err(Error::config(
                "discriminator needs n_stages >= 1 and base_channels >= 1",
            ));
        }
        if self.image_channels != 1 && self.image_channels != 3 {
            return Err(Error::config("discriminator image_channels must be 1 or 3"));
        }
        Ok(())
    }

    /// Feature width after stage `s` (doubling, capped at 8x base).
    pub fn stage_channels(&self, s: usize) -> usize {
        self.base_channels << (s + 1).min(3)
    }

    /// Spatial size of the last feature map for an `h x w` input; every
    /// stage halves it (rounding up).
    pub fn final_grid(&self, h: usize, w: usize) -> (usize, usize) {
        (0..self.n_stages).fold((h, w), |(h, w), _| (h.div_ceil(2), w.div_ceil(2)))
    }

    pub fn param_count(&self) -> usize {
        let conv = |cin: usize, cout: usize| cin * cout * 9 + cout;
        let mut total = conv(self.image_channels, self.base_channels);
        let mut cin = self.base_channels;
        for s in 0..self.n_stages {
            let cs = self.stage_channels(s);
            total += conv(cin, cs) + conv(cs, cs);
            cin = cs;
        }
        total + cin * cin + cin + cin + 1
    }
}

/// After which blocks (0-based) dropout layers sit: `count` positions spread
/// evenly over `n_blocks`, the last one after the final block.
pub fn dropout_positions(n_blocks: usize, count: usize) -> Vec<usize> {
    (0..count).map(|i| ((i + 1) * n_blocks).div_ceil(count) - 1).collect()
}
