//! Run configuration: one TOML document per run.
//!
//! Sections may be written as tables (`[train]`) or as dotted keys
//! (`train.lr0 = 2e-4`). Every section is optional; `generator`,
//! `discriminator`, `pretrain` and `train` are merged key by key onto the
//! preset selected by `model.family` and `model.preset`. Unknown keys are
//! rejected.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{EvalConfig, MetricConfig, SsimConfig, DEFAULT_BINS, DEFAULT_THRESHOLDS};
use crate::losses::{FeatureExtractor, LossWeights};
use crate::models::{Architecture, DiscriminatorConfig, GeneratorConfig};
use crate::seed::{self, Stream};
use crate::training::{GanLosses, Phase, Recipe, TrainConfig};
use crate::uncertainty::{StdMode, DEFAULT_ENSEMBLE_SIZE, DEFAULT_MCD_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Srgan,
    #[default]
    Esrgan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Published layer counts and widths.
    #[default]
    Full,
    /// Narrow, shallow networks for CPU-scale runs.
    Tiny,
}

/// How super-resolved images and their uncertainty are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One deterministic forward; no uncertainty.
    Single,
    /// Repeated forwards with dropout active.
    #[default]
    Mcd,
    /// One forward per independently trained member.
    Ensemble,
    /// Returns the input unchanged; a stub for scale-1 self pairs.
    Identity,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Method::Single),
            "mcd" => Ok(Method::Mcd),
            "ensemble" => Ok(Method::Ensemble),
            "identity" => Ok(Method::Identity),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (single, mcd, ensemble, identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub family: Family,
    pub preset: Preset,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorSection {
    /// Conv tag such as `conv5_4`; the deepest conv when absent.
    pub layer: Option<String>,
    /// Initialization seed of the random fallback extractor; derived from
    /// the run seed when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintySection {
    pub method: Method,
    /// Number of stochastic forwards for MC dropout.
    pub samples: usize,
    pub mode: StdMode,
    /// Seed of the dropout masks at inference; the run seed when absent.
    pub seed: Option<u64>,
}

impl Default for UncertaintySection {
    fn default() -> Self {
        Self {
            method: Method::Mcd,
            samples: DEFAULT_MCD_SAMPLES,
            mode: StdMode::PaperEq7,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub n_bins: usize,
    pub n_thresholds: usize,
    pub data_range: f64,
    pub luminance: bool,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let m = MetricConfig::default();
        Self {
            n_bins: DEFAULT_BINS,
            n_thresholds: DEFAULT_THRESHOLDS,
            data_range: m.data_range,
            luminance: m.luminance,
            ssim_window: m.ssim.window,
            ssim_sigma: m.ssim.sigma,
            k1: m.ssim.k1,
            k2: m.ssim.k2,
        }
    }
}

impl EvaluationSection {
    pub fn eval_config(&self, std_mode: StdMode) -> EvalConfig {
        EvalConfig {
            metrics: MetricConfig {
                data_range: self.data_range,
                luminance: self.luminance,
                ssim: SsimConfig {
                    window: self.ssim_window,
                    sigma: self.ssim_sigma,
                    k1: self.k1,
                    k2: self.k2,
                },
            },
            std_mode,
            n_bins: self.n_bins,
            n_thresholds: self.n_thresholds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub size: usize,
    /// Explicit member seeds; `seed, seed + 1, ...` when absent.
    pub seeds: Option<Vec<u64>>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            size: DEFAULT_ENSEMBLE_SIZE,
            seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// Dataset manifest.
    pub data: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Directory holding pretrained feature-extractor weights.
    pub weights_dir: Option<PathBuf>,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    /// L1 pretraining; absent or zero epochs skips it.
    pub pretrain: Option<TrainConfig>,
    pub train: TrainConfig,
    pub loss: LossWeights,
    pub extractor: ExtractorSection,
    pub uncertainty: UncertaintySection,
    pub evaluation: EvaluationSection,
    pub ensemble: EnsembleSection,
    pub paths: PathsSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    model: ModelSection,
    generator: Option<toml::Table>,
    discriminator: Option<toml::Table>,
    pretrain: Option<toml::Table>,
    train: Option<toml::Table>,
    #[serde(default)]
    loss: LossWeights,
    #[serde(default)]
    extractor: ExtractorSection,
    #[serde(default)]
    uncertainty: UncertaintySection,
    #[serde(default)]
    evaluation: EvaluationSection,
    #[serde(default)]
    ensemble: EnsembleSection,
    #[serde(default)]
    paths: PathsSection,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn overlay<T: Serialize + for<'de> Deserialize<'de>>(section: &str, base: T, over: Option<toml::Table>) -> Result<T> {
    let Some(over) = over else { return Ok(base) };
    let mut table = toml::Table::try_from(&base).map_err(|e| Error::Config(format!("{section}: {e}")))?;
    merge(&mut table, over);
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{section}: {}", e.message())))
}

impl RunConfig {
    /// Preset networks and schedules of a family.
    pub fn preset(family: Family, preset: Preset) -> Self {
        let (generator, discriminator) = match (family, preset) {
            (Family::Srgan, Preset::Full) => (GeneratorConfig::srgan(), DiscriminatorConfig::srgan()),
            (Family::Srgan, Preset::Tiny) => (GeneratorConfig::tiny_srgan(), DiscriminatorConfig::tiny(false)),
            (Family::Esrgan, Preset::Full) => (GeneratorConfig::esrgan(), DiscriminatorConfig::esrgan()),
            (Family::Esrgan, Preset::Tiny) => (GeneratorConfig::tiny_esrgan(), DiscriminatorConfig::tiny(true)),
        };
        let (pretrain, train) = match family {
            Family::Srgan => (None, TrainConfig::srgan()),
            Family::Esrgan => (Some(TrainConfig::esrgan_pretrain()), TrainConfig::esrgan_adversarial()),
        };
        // the tiny networks need a larger step to fit in a few hundred steps
        let pretrain = pretrain.map(|p| match preset {
            Preset::Tiny => TrainConfig { lr0: 1e-3, ..p },
            Preset::Full => p,
        });
        Self {
            seed: 0,
            model: ModelSection { family, preset },
            generator,
            discriminator,
            pretrain,
            train,
            loss: LossWeights::default(),
            extractor: ExtractorSection::default(),
            uncertainty: UncertaintySection::default(),
            evaluation: EvaluationSection::default(),
            ensemble: EnsembleSection::default(),
            paths: PathsSection::default(),
        }
    }

    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let base = Self::preset(raw.model.family, raw.model.preset);
        let pretrain_base = base.pretrain.clone().unwrap_or_else(|| TrainConfig {
            epochs: 0,
            ..TrainConfig::esrgan_pretrain()
        });
        let pretrain = overlay("pretrain", pretrain_base, raw.pretrain)?;
        let cfg = Self {
            seed: raw.seed,
            model: raw.model,
            generator: overlay("generator", base.generator, raw.generator)?,
            discriminator: overlay("discriminator", base.discriminator, raw.discriminator)?,
            pretrain: (pretrain.epochs > 0).then_some(pretrain),
            train: overlay("train", base.train, raw.train)?,
            loss: raw.loss,
            extractor: raw.extractor,
            uncertainty: raw.uncertainty,
            evaluation: raw.evaluation,
            ensemble: raw.ensemble,
            paths: raw.paths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The resolved document; parsing it gives back `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn generator_arch(&self) -> Architecture {
        match self.model.family {
            Family::Srgan => Architecture::SrganGenerator(self.generator.clone()),
            Family::Esrgan => Architecture::EsrganGenerator(self.generator.clone()),
        }
    }

    pub fn discriminator_arch(&self) -> Architecture {
        match self.model.family {
            Family::Srgan => Architecture::SrganDiscriminator(self.discriminator.clone()),
            Family::Esrgan => Architecture::EsrganDiscriminator(self.discriminator.clone()),
        }
    }

    pub fn ensemble_seeds(&self) -> Vec<u64> {
        match &self.ensemble.seeds {
            Some(s) => s.clone(),
            None => (0..self.ensemble.size as u64)
                .map(|k| self.seed.wrapping_add(k))
                .collect(),
        }
    }

    pub fn inference_seed(&self) -> u64 {
        self.uncertainty.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| match e {
            Error::Config(m) => Error::Config(format!("{name}: {m}")),
            other => other,
        };
        self.generator_arch().validate().map_err(|e| field("generator", e))?;
        self.discriminator_arch()
            .validate()
            .map_err(|e| field("discriminator", e))?;
        if self.generator.image_channels != self.discriminator.image_channels {
            return Err(Error::config(
                "discriminator.image_channels: must equal generator.image_channels",
            ));
        }
        if let Some(p) = &self.pretrain {
            if p.phase != Phase::PsnrPretrain {
                return Err(Error::config("pretrain.phase: must be \"psnr_pretrain\""));
            }
            p.validate().map_err(|e| field("pretrain", e))?;
        }
        if self.train.phase != Phase::Adversarial {
            return Err(Error::config("train.phase: must be \"adversarial\""));
        }
        self.train.validate().map_err(|e| field("train", e))?;
        self.loss.validate().map_err(|e| field("loss", e))?;
        if self.uncertainty.samples == 0 {
            return Err(Error::config("uncertainty.samples: must be at least 1"));
        }
        let ev = &self.evaluation;
        if ev.n_bins == 0 {
            return Err(Error::config("evaluation.n_bins: must be at least 1"));
        }
        if ev.n_thresholds < 2 {
            return Err(Error::config("evaluation.n_thresholds: must be at least 2"));
        }
        if !(ev.data_range > 0.0 && ev.data_range.is_finite()) {
            return Err(Error::config("evaluation.data_range: must be positive"));
        }
        if ev.ssim_window == 0 || ev.ssim_window.is_multiple_of(2) || ev.ssim_sigma.is_nan() || ev.ssim_sigma <= 0.0 {
            return Err(Error::config(
                "evaluation.ssim_window: must be odd and positive with ssim_sigma > 0",
            ));
        }
        let seeds = self.ensemble_seeds();
        if seeds.is_empty() {
            return Err(Error::config("ensemble: needs at least one member"));
        }
        let mut seen = HashSet::new();
        if let Some(d) = seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::config(format!("ensemble.seeds: seed {d} is used twice")));
        }
        Ok(())
    }

    /// The perceptual feature extractor: pretrained weights from
    /// `weights_dir` when present, otherwise a seeded random network.
    pub fn extractor(&self, weights_dir: Option<&Path>) -> Result<FeatureExtractor> {
        let dir = weights_dir.or(self.paths.weights_dir.as_deref());
        let seed = self
            .extractor
            .seed
            .unwrap_or_else(|| seed::stream_seed(self.seed, Stream::Extractor));
        FeatureExtractor::resolve(
            dir,
            self.extractor.layer.as_deref(),
            self.generator.image_channels,
            seed,
        )
    }

    pub fn recipe(&self, weights_dir: Option<&Path>) -> Result<Recipe> {
        let recipe = Recipe {
            generator: self.generator_arch(),
            discriminator: self.discriminator_arch(),
            pretrain: self.pretrain.clone(),
            adversarial: (self.train.epochs > 0).then(|| self.train.clone()),
            losses: GanLosses {
                weights: self.loss,
                extractor: self.extractor(weights_dir)?,
            },
        };
        recipe.validate()?;
        Ok(recipe)
    }
}
