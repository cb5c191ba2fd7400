use std::collections::HashSet;

use super::config::{Phase, TrainConfig};
use super::gan::{pretrain_psnr, train_gan, GanLosses};
use super::report::TrainReport;
use crate::error::{Error, Result};
use crate::imaging::TrainingPair;
use crate::models::{Architecture, Model};
use crate::seed::{self, Stream};

/// Everything that defines a training run except its seed.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub generator: Architecture,
    pub discriminator: Architecture,
    /// L1 pretraining, run first when present.
    pub pretrain: Option<TrainConfig>,
    pub adversarial: Option<TrainConfig>,
    pub losses: GanLosses,
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        if !self.generator.is_generator() || self.discriminator.is_generator() {
            return Err(Error::config("recipe needs a generator and a discriminator"));
        }
        if self.pretrain.is_none() && self.adversarial.is_none() {
            return Err(Error::config("recipe has no training phase"));
        }
        if let Some(c) = &self.pretrain {
            if c.phase != Phase::PsnrPretrain {
                return Err(Error::config("pretrain config must have phase = psnr_pretrain"));
            }
            c.validate()?;
        }
        if let Some(c) = &self.adversarial {
            if c.phase != Phase::Adversarial {
                return Err(Error::config("adversarial config must have phase = adversarial"));
            }
            c.validate()?;
        }
        Ok(())
    }
}

pub struct RunOutcome {
    pub seed: u64,
    pub generator: Model,
    pub discriminator: Option<Model>,
    pub pretrain: Option<TrainReport>,
    pub adversarial: Option<TrainReport>,
}

impl RunOutcome {
    /// Report of the last phase that ran.
    pub fn last_report(&self) -> &TrainReport {
        self.adversarial
            .as_ref()
            .or(self.pretrain.as_ref())
            .expect("a validated recipe runs at least one phase")
    }
}

/// Builds both networks from `seed` and runs the recipe's phases. The
/// phase configs' own `seed` fields are replaced by `seed`.
pub fn run_recipe(recipe: &Recipe, data: &[TrainingPair], seed: u64) -> Result<RunOutcome> {
    recipe.validate()?;
    let mut gen = Model::build(recipe.generator.clone(), seed::stream_seed(seed, Stream::GeneratorInit))?;
    let mut pretrain = None;
    if let Some(cfg) = &recipe.pretrain {
        let cfg = TrainConfig { seed, ..cfg.clone() };
        let t = pretrain_psnr(gen, data, &cfg)?;
        gen = t.model;
        pretrain = Some(t.report);
    }
    let mut discriminator = None;
    let mut adversarial = None;
    if let Some(cfg) = &recipe.adversarial {
        // a separate sub-seed keeps the data order and dropout streams of
        // the two phases apart
        let cfg = TrainConfig {
            seed: seed::derive(seed, 2),
            ..cfg.clone()
        };
        let disc = Model::build(
            recipe.discriminator.clone(),
            seed::stream_seed(seed, Stream::DiscriminatorInit),
        )?;
        let t = train_gan(gen, disc, data, &cfg, &recipe.losses)?;
        gen = t.generator;
        discriminator = Some(t.discriminator);
        adversarial = Some(t.report);
    }
    Ok(RunOutcome {
        seed,
        generator: gen,
        discriminator,
        pretrain,
        adversarial,
    })
}

/// One independent run per seed; members share nothing but the recipe and
/// the data, so running them on parallel threads gives the same result as
/// running them in turn.
pub fn train_ensemble(
    recipe: &Recipe,
    data: &[TrainingPair],
    seeds: &[u64],
    parallel: bool,
) -> Result<Vec<RunOutcome>> {
    if seeds.is_empty() {
        return Err(Error::config("an ensemble needs at least one seed"));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(Error::config(format!("ensemble seed {dup} is used twice")));
    }
    recipe.validate()?;
    if !parallel || seeds.len() == 1 {
        return seeds.iter().map(|s| run_recipe(recipe, data, *s)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|s| scope.spawn(move || run_recipe(recipe, data, *s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ensemble member panicked"))
            .collect()
    })
}
