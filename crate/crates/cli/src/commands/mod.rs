mod evaluate;
mod infer;
mod prepare;
mod render;
mod train;

use std::path::{Path, PathBuf};

use srunc_core::artifacts::{sampler_from_checkpoints, Checkpoint, Method, SamplerSpec};
use srunc_core::uncertainty::Sampler;
use srunc_core::Error;

use crate::{Command, Context, SamplingArgs};

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Bad arguments or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The command could not complete; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Shape(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

pub(crate) fn dispatch(command: &Command, ctx: &Context) -> Result<(), Failure> {
    match command {
        Command::Prepare(a) => prepare::run(a),
        Command::Train(a) => train::run(a, ctx),
        Command::TrainEnsemble(a) => train::run_ensemble(a, ctx),
        Command::Infer(a) => infer::run(a, ctx),
        Command::Evaluate(a) => evaluate::run(a, ctx, false),
        Command::Calibrate(a) => evaluate::run(a, ctx, true),
        Command::Render(a) => render::run(a),
    }
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn required(value: Option<&PathBuf>, flag: &str, key: &str) -> Result<PathBuf, Failure> {
    value
        .cloned()
        .ok_or_else(|| Failure::Usage(format!("no {flag} given and `{key}` is not configured")))
}

/// The sampler requested by `--method` and `--checkpoint`.
fn sampler(args: &SamplingArgs, ctx: &Context) -> Result<(Method, Box<dyn Sampler>), Failure> {
    let u = &ctx.config.uncertainty;
    let method = args.method.unwrap_or(u.method);
    let checkpoints = args
        .checkpoints
        .iter()
        .map(|p| Checkpoint::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let expected = ctx.config.generator_arch();
    let spec = SamplerSpec {
        method,
        samples: args.samples.unwrap_or(u.samples),
        seed: ctx.config.inference_seed(),
        sequential: ctx.deterministic,
        expected: ctx.config_given.then_some(&expected),
    };
    Ok((method, sampler_from_checkpoints(&checkpoints, spec)?))
}
