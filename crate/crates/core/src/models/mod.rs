//! Generators and discriminators.
//!
//! A [`Model`] is an architecture description plus a flat, named list of
//! parameters. Construction is fully determined by `(architecture, seed)`.

mod config;
mod discriminator;
mod esrgan;
mod layers;
pub(crate) use layers::{Conv, ParamBuilder};
mod srgan;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::nn::pixel_shuffle;
pub use config::{dropout_positions, DiscriminatorConfig, GeneratorConfig};
pub use layers::Param;

use crate::error::{Error, Result};
use crate::nn::{Tape, Tensor, Var};
use discriminator::Discriminator;
use esrgan::EsrganGenerator;
use srgan::SrganGenerator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    SrganGenerator(GeneratorConfig),
    EsrganGenerator(GeneratorConfig),
    SrganDiscriminator(DiscriminatorConfig),
    EsrganDiscriminator(DiscriminatorConfig),
}

impl Architecture {
    pub fn is_generator(&self) -> bool {
        matches!(self, Architecture::SrganGenerator(_) | Architecture::EsrganGenerator(_))
    }

    pub fn generator_config(&self) -> Option<&GeneratorConfig> {
        match self {
            Architecture::SrganGenerator(c) | Architecture::EsrganGenerator(c) => Some(c),
            _ => None,
        }
    }

    pub fn image_channels(&self) -> usize {
        match self {
            Architecture::SrganGenerator(c) | Architecture::EsrganGenerator(c) => c.image_channels,
            Architecture::SrganDiscriminator(c) | Architecture::EsrganDiscriminator(c) => c.image_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::SrganGenerator(c) => c.validate(false),
            Architecture::EsrganGenerator(c) => c.validate(true),
            Architecture::SrganDiscriminator(c) => {
                c.validate()?;
                if c.relativistic {
                    return Err(Error::config("the SRGAN discriminator is not relativistic"));
                }
                Ok(())
            }
            Architecture::EsrganDiscriminator(c) => {
                c.validate()?;
                if !c.relativistic {
                    return Err(Error::config("the ESRGAN discriminator must be relativistic"));
                }
                Ok(())
            }
        }
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        match self {
            Architecture::SrganGenerator(c) => c.srgan_param_count(),
            Architecture::EsrganGenerator(c) => c.esrgan_param_count(),
            Architecture::SrganDiscriminator(c) | Architecture::EsrganDiscriminator(c) => c.param_count(),
        }
    }
}

enum Network {
    Srgan(SrganGenerator),
    Esrgan(EsrganGenerator),
    Disc(Discriminator),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

pub struct Model {
    arch: Architecture,
    net: Network,
    params: Vec<Param>,
    mode: Mode,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("arch", &self.arch)
            .field("params", &self.params.len())
            .field("mode", &self.mode)
            .finish()
    }
}

impl Clone for Model {
    fn clone(&self) -> Self {
        let mut m = Model::build(self.arch.clone(), 0).expect("architecture was valid");
        m.params = self.params.clone();
        m.mode = self.mode;
        m
    }
}

impl Model {
    pub fn build(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut pb = ParamBuilder::new(seed);
        let net = match &arch {
            Architecture::SrganGenerator(c) => Network::Srgan(SrganGenerator::build(c, &mut pb)),
            Architecture::EsrganGenerator(c) => Network::Esrgan(EsrganGenerator::build(c, &mut pb)),
            Architecture::SrganDiscriminator(c) | Architecture::EsrganDiscriminator(c) => {
                Network::Disc(Discriminator::build(c, &mut pb))
            }
        };
        Ok(Self {
            arch,
            net,
            params: pb.params,
            mode: Mode::Eval,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize, usize, usize)> {
        self.params.iter().map(|p| p.value.dim()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn is_generator(&self) -> bool {
        self.arch.is_generator()
    }

    pub fn scale(&self) -> usize {
        self.arch.generator_config().map_or(1, |c| c.scale)
    }

    /// Blocks after which dropout is applied (empty for discriminators).
    pub fn dropout_positions(&self) -> Vec<usize> {
        match &self.net {
            Network::Srgan(g) => g.dropout_positions().to_vec(),
            Network::Esrgan(g) => g.dropout_positions().to_vec(),
            Network::Disc(_) => Vec::new(),
        }
    }

    pub fn dropout_p(&self) -> f64 {
        self.arch.generator_config().map_or(0.0, |c| c.dropout_p)
    }

    /// Records the forward pass on `tape`. Generators return raw (unclamped)
    /// images; discriminators return `N x 1 x 1 x 1` logits. Dropout is
    /// active exactly when `dropout_rng` is given.
    pub fn forward_tape(&self, tape: &mut Tape, x: Var, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let c = tape.value(x).dim().1;
        if c != self.arch.image_channels() {
            return Err(Error::shape(format!(
                "model expects {} channels, batch has {c}",
                self.arch.image_channels()
            )));
        }
        match &self.net {
            Network::Srgan(g) => g.forward(tape, &self.params, x, dropout_rng),
            Network::Esrgan(g) => g.forward(tape, &self.params, x, dropout_rng),
            Network::Disc(d) => d.forward(tape, &self.params, x),
        }
    }

    /// Inference on an `N x C x H x W` batch. Generators return images
    /// clamped to `[0, 1]`; the SRGAN discriminator returns probabilities and
    /// the ESRGAN discriminator raw logits, shaped `N x 1 x 1 x 1`.
    pub fn forward(&self, batch: &Tensor, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let y = self.forward_tape(&mut tape, x, dropout_rng)?;
        let out = tape.take_value(y);
        Ok(match self.arch {
            Architecture::SrganGenerator(_) | Architecture::EsrganGenerator(_) => {
                out.mapv(crate::imaging::ImageTensor::clamp_value)
            }
            Architecture::SrganDiscriminator(_) => out.mapv(sigmoid),
            Architecture::EsrganDiscriminator(_) => out,
        })
    }

    /// Output of RRDB `index` for the given trunk features (ESRGAN only).
    pub fn rrdb_forward(&self, index: usize, features: &Tensor) -> Result<Tensor> {
        let Network::Esrgan(g) = &self.net else {
            return Err(Error::config("not an ESRGAN generator"));
        };
        let block = g
            .rrdbs
            .get(index)
            .ok_or_else(|| Error::Range(format!("no RRDB {index}")))?;
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let y = block.forward(&mut tape, &self.params, x, g.beta())?;
        Ok(tape.take_value(y))
    }

    /// Input channel count of every conv in RDB `rdb` of RRDB `rrdb`.
    pub fn rdb_input_channels(&self, rrdb: usize, rdb: usize) -> Result<Vec<usize>> {
        let Network::Esrgan(g) = &self.net else {
            return Err(Error::config("not an ESRGAN generator"));
        };
        g.rrdbs
            .get(rrdb)
            .and_then(|b| b.rdbs.get(rdb))
            .map(|b| b.input_channels(&self.params))
            .ok_or_else(|| Error::Range(format!("no RDB {rrdb}.{rdb}")))
    }

    /// Replaces all parameters, checking names and shapes against this
    /// model's architecture.
    pub fn load_params(&mut self, params: Vec<Param>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameters supplied, architecture has {}",
                params.len(),
                self.params.len()
            )));
        }
        for (have, want) in params.iter().zip(&self.params) {
            if have.name != want.name || have.value.dim() != want.value.dim() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match architecture parameter {} {:?}",
                    have.name,
                    have.value.dim(),
                    want.name,
                    want.value.dim()
                )));
            }
        }
        self.params = params;
        Ok(())
    }
}

pub fn build_srgan_generator(cfg: GeneratorConfig, seed: u64) -> Result<Model> {
    Model::build(Architecture::SrganGenerator(cfg), seed)
}

pub fn build_esrgan_generator(cfg: GeneratorConfig, seed: u64) -> Result<Model> {
    Model::build(Architecture::EsrganGenerator(cfg), seed)
}

pub fn build_srgan_discriminator(cfg: DiscriminatorConfig, seed: u64) -> Result<Model> {
    Model::build(Architecture::SrganDiscriminator(cfg), seed)
}

pub fn build_esrgan_discriminator(cfg: DiscriminatorConfig, seed: u64) -> Result<Model> {
    Model::build(Architecture::EsrganDiscriminator(cfg), seed)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests;
