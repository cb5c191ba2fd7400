use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::models::Model;
use crate::seed;

pub const DEFAULT_MCD_SAMPLES: usize = 10;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Single,
    Mcd,
    Ensemble,
    Identity,
}

/// `M` generator outputs for one input, with the seeds that produced them
/// (per-sample dropout seeds for MC dropout, member seeds for ensembles
/// when known).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStack {
    samples: Vec<ImageTensor>,
    source: SampleSource,
    seeds: Vec<u64>,
}

impl SampleStack {
    pub fn new(samples: Vec<ImageTensor>, source: SampleSource, seeds: Vec<u64>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::config("a sample stack needs at least one sample"))?;
        if let Some(s) = samples.iter().find(|s| s.dims() != first.dims()) {
            return Err(Error::Shape(format!(
                "sample dims {:?} differ from {:?}",
                s.dims(),
                first.dims()
            )));
        }
        Ok(Self { samples, source, seeds })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[ImageTensor] {
        &self.samples
    }

    pub fn source(&self) -> SampleSource {
        self.source
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    /// `(H, W, C)` shared by every sample.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.samples[0].dims()
    }
}

fn upscale(gen: &Model, lr: &ImageTensor, rng: Option<&mut rand_chacha::ChaCha8Rng>) -> Result<ImageTensor> {
    if !gen.is_generator() {
        return Err(Error::config("sampling requires a generator"));
    }
    let batch = ImageTensor::to_batch(std::slice::from_ref(lr))?;
    let out = gen.forward(&batch, rng)?;
    Ok(ImageTensor::from_batch(&out)?.remove(0))
}

/// Runs `f(i)` for `i in 0..n`, on worker threads unless `sequential`.
/// Results are returned in index order either way.
fn run_indexed<T: Send>(n: usize, sequential: bool, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    if sequential || n <= 1 {
        return (0..n).map(&f).collect();
    }
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = (0..n).map(|i| s.spawn(move || f(i))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    })
}

/// `m` forwards with dropout active; sample `i` draws its masks from
/// `seed::derive(seed, i)`.
pub fn mc_dropout_sample(gen: &Model, lr: &ImageTensor, m: usize, seed: u64) -> Result<SampleStack> {
    mc_dropout_sample_with(gen, lr, m, seed, false)
}

pub(crate) fn mc_dropout_sample_with(
    gen: &Model,
    lr: &ImageTensor,
    m: usize,
    seed: u64,
    sequential: bool,
) -> Result<SampleStack> {
    if m < 1 {
        return Err(Error::config("MC dropout needs M >= 1"));
    }
    let seeds: Vec<u64> = (0..m as u64).map(|i| seed::derive(seed, i)).collect();
    let samples = run_indexed(m, sequential, |i| {
        let mut rng = seed::rng(seeds[i]);
        upscale(gen, lr, Some(&mut rng))
    })?;
    SampleStack::new(samples, SampleSource::Mcd, seeds)
}

/// One deterministic forward per member.
pub fn ensemble_sample(members: &[Model], lr: &ImageTensor) -> Result<SampleStack> {
    ensemble_sample_with(members, lr, false)
}

pub(crate) fn ensemble_sample_with(members: &[Model], lr: &ImageTensor, sequential: bool) -> Result<SampleStack> {
    if members.is_empty() {
        return Err(Error::config("an ensemble needs at least one member"));
    }
    let scale = members[0].scale();
    if members.iter().any(|m| m.scale() != scale) {
        return Err(Error::Shape("ensemble members upscale by different factors".into()));
    }
    let samples = run_indexed(members.len(), sequential, |i| upscale(&members[i], lr, None))?;
    SampleStack::new(samples, SampleSource::Ensemble, Vec::new())
}

/// Produces a sample stack for a low-resolution input.
pub trait Sampler: Sync {
    fn sample(&self, lr: &ImageTensor) -> Result<SampleStack>;

    /// Output size per input pixel.
    fn scale(&self) -> usize;
}

/// A single deterministic forward (`M = 1`).
pub struct SingleSampler {
    pub model: Model,
}

impl Sampler for SingleSampler {
    fn sample(&self, lr: &ImageTensor) -> Result<SampleStack> {
        SampleStack::new(vec![upscale(&self.model, lr, None)?], SampleSource::Single, Vec::new())
    }

    fn scale(&self) -> usize {
        self.model.scale()
    }
}

pub struct McdSampler {
    pub model: Model,
    pub samples: usize,
    pub seed: u64,
    pub sequential: bool,
}

impl Sampler for McdSampler {
    fn sample(&self, lr: &ImageTensor) -> Result<SampleStack> {
        mc_dropout_sample_with(&self.model, lr, self.samples, self.seed, self.sequential)
    }

    fn scale(&self) -> usize {
        self.model.scale()
    }
}

pub struct EnsembleSampler {
    pub members: Vec<Model>,
    pub seeds: Vec<u64>,
    pub sequential: bool,
}

impl Sampler for EnsembleSampler {
    fn sample(&self, lr: &ImageTensor) -> Result<SampleStack> {
        Ok(ensemble_sample_with(&self.members, lr, self.sequential)?.with_seeds(self.seeds.clone()))
    }

    fn scale(&self) -> usize {
        self.members.first().map_or(1, Model::scale)
    }
}

/// Returns the input unchanged; an oracle stub for scale-1 self pairs.
pub struct IdentitySampler;

impl Sampler for IdentitySampler {
    fn sample(&self, lr: &ImageTensor) -> Result<SampleStack> {
        SampleStack::new(vec![lr.clone()], SampleSource::Identity, Vec::new())
    }

    fn scale(&self) -> usize {
        1
    }
}
