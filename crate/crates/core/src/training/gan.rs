use std::time::Instant;

use ndarray::{concatenate, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::{lr_at, Phase, TrainConfig};
use super::report::{EpochRecord, TrainReport};
use crate::error::{Error, Result};
use crate::imaging::{augment_pair, ImageTensor, TrainingPair};
use crate::losses::{
    content_l1_grad, esrgan_generator_loss_grad, gan_discriminator_loss_grad, ragan_grads, srgan_generator_loss_grad,
    FeatureExtractor, GeneratorTerms, LossWeights,
};
use crate::models::{sigmoid, Architecture, Mode, Model};
use crate::nn::{Tape, Tensor};
use crate::seed::{self, Stream};

/// Loss settings of the adversarial phase.
#[derive(Debug, Clone)]
pub struct GanLosses {
    /// Weights of the ESRGAN objective; the SRGAN objective has fixed
    /// coefficients.
    pub weights: LossWeights,
    pub extractor: FeatureExtractor,
}

pub struct Trained {
    pub model: Model,
    pub report: TrainReport,
}

pub struct GanTrained {
    pub generator: Model,
    pub discriminator: Model,
    pub report: TrainReport,
}

/// Shuffles and augments the training pairs into batches, one epoch at a
/// time.
struct Loader<'a> {
    data: &'a [TrainingPair],
    cfg: &'a TrainConfig,
    order: ChaCha8Rng,
    augment: ChaCha8Rng,
}

impl<'a> Loader<'a> {
    fn new(data: &'a [TrainingPair], cfg: &'a TrainConfig, scale: usize) -> Result<Self> {
        cfg.validate()?;
        let first = data.first().ok_or_else(|| Error::config("training set is empty"))?;
        if cfg.batch_size > data.len() {
            return Err(Error::config(format!(
                "batch_size {} exceeds the {} training pairs",
                cfg.batch_size,
                data.len()
            )));
        }
        for p in data {
            if p.lr.dims() != first.lr.dims() || p.hr.dims() != first.hr.dims() {
                return Err(Error::Shape(format!(
                    "pair {} differs in size from {}",
                    p.source_id, first.source_id
                )));
            }
            if p.hr.height() != p.lr.height() * scale || p.hr.width() != p.lr.width() * scale {
                return Err(Error::config(format!("pair {} is not a x{scale} pair", p.source_id)));
            }
        }
        Ok(Self {
            data,
            cfg,
            order: seed::rng(seed::stream_seed(cfg.seed, Stream::DataOrder)),
            augment: seed::rng(seed::stream_seed(cfg.seed, Stream::Augment)),
        })
    }

    fn epoch(&mut self) -> Result<Vec<(Tensor, Tensor)>> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut self.order);
        order
            .chunks(self.cfg.batch_size)
            .map(|chunk| {
                let pairs = chunk
                    .iter()
                    .map(|&i| augment_pair(&self.data[i], &self.cfg.augment, &mut self.augment))
                    .collect::<Result<Vec<_>>>()?;
                let lr: Vec<ImageTensor> = pairs.iter().map(|p| p.lr.clone()).collect();
                let hr: Vec<ImageTensor> = pairs.into_iter().map(|p| p.hr).collect();
                Ok((ImageTensor::to_batch(&lr)?, ImageTensor::to_batch(&hr)?))
            })
            .collect()
    }
}

fn guard(epoch: usize, step: usize, term: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence {
            epoch,
            step,
            term: term.into(),
            value,
        })
    }
}

fn seeds_of(cfg: &TrainConfig) -> Vec<(String, u64)> {
    [Stream::DataOrder, Stream::Augment, Stream::Dropout]
        .into_iter()
        .map(|s| (format!("{s:?}").to_lowercase(), seed::stream_seed(cfg.seed, s)))
        .chain([("run".into(), cfg.seed)])
        .collect()
}

/// Running means of the logged terms within one epoch.
#[derive(Default)]
struct Means {
    n: f64,
    total: f64,
    content: Option<f64>,
    perceptual: Option<f64>,
    adv: Option<f64>,
    d: Option<f64>,
}

impl Means {
    fn add(&mut self, total: f64, content: Option<f64>, perceptual: Option<f64>, adv: Option<f64>, d: Option<f64>) {
        let acc = |slot: &mut Option<f64>, v: Option<f64>| {
            if let Some(v) = v {
                *slot = Some(slot.unwrap_or(0.0) + v);
            }
        };
        self.n += 1.0;
        self.total += total;
        acc(&mut self.content, content);
        acc(&mut self.perceptual, perceptual);
        acc(&mut self.adv, adv);
        acc(&mut self.d, d);
    }

    fn record(&self, epoch: usize, lr: f64) -> EpochRecord {
        let n = self.n;
        EpochRecord {
            epoch,
            lr,
            g_total: self.total / n,
            g_content: self.content.map(|v| v / n),
            g_perceptual: self.perceptual.map(|v| v / n),
            g_adv: self.adv.map(|v| v / n),
            d_loss: self.d.map(|v| v / n),
        }
    }
}

/// Optimizes the generator on `content_l1` alone, with dropout active.
pub fn pretrain_psnr(mut gen: Model, data: &[TrainingPair], cfg: &TrainConfig) -> Result<Trained> {
    if cfg.phase != Phase::PsnrPretrain {
        return Err(Error::config("pretrain_psnr needs phase = psnr_pretrain"));
    }
    if !gen.is_generator() {
        return Err(Error::config("pretrain_psnr needs a generator"));
    }
    let start = Instant::now();
    let mut loader = Loader::new(data, cfg, gen.scale())?;
    let mut dropout = seed::rng(seed::stream_seed(cfg.seed, Stream::Dropout));
    let mut adam = Adam::new(gen.params(), cfg.beta1, cfg.beta2);
    let shapes = gen.param_shapes();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    gen.set_mode(Mode::Train);
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let mut means = Means::default();
        for (x, y) in loader.epoch()? {
            let mut tape = Tape::new();
            let input = tape.constant(x);
            let out = gen.forward_tape(&mut tape, input, Some(&mut dropout))?;
            let (loss, seed) = content_l1_grad(tape.value(out), &y)?;
            guard(epoch, step, "g_content", loss)?;
            let grads = tape.backward(out, seed)?.collect_params(&tape, &shapes);
            adam.step(gen.params_mut(), &grads, lr);
            means.add(loss, Some(loss), None, None, None);
            step += 1;
        }
        records.push(means.record(epoch, lr));
    }
    gen.set_mode(Mode::Eval);
    Ok(Trained {
        model: gen,
        report: TrainReport {
            phase: Phase::PsnrPretrain,
            records,
            steps: step,
            seeds: seeds_of(cfg),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

fn logits_vec(t: &Tensor) -> Vec<f64> {
    t.iter().copied().collect()
}

fn as_seed(values: Vec<f64>) -> Tensor {
    let n = values.len();
    Tensor::from_shape_vec((n, 1, 1, 1), values).expect("one score per image")
}

/// One discriminator update on the batch `[hr; sr]`; returns the loss
/// before the update. The generator is not involved.
pub(crate) fn discriminator_step(
    disc: &mut Model,
    adam: &mut Adam,
    hr: &Tensor,
    sr: &Tensor,
    relativistic: bool,
    lr: f64,
) -> Result<f64> {
    let b = hr.dim().0;
    let both = concatenate(Axis(0), &[hr.view(), sr.view()]).map_err(|e| Error::Shape(e.to_string()))?;
    let mut tape = Tape::new();
    let input = tape.constant(both);
    let out = disc.forward_tape(&mut tape, input, None)?;
    let z = logits_vec(tape.value(out));
    let (real, fake) = z.split_at(b);
    let (loss, seed) = if relativistic {
        let rg = ragan_grads(real, fake)?;
        (rg.losses.disc, [rg.disc_wrt_real, rg.disc_wrt_fake].concat())
    } else {
        let p_real: Vec<f64> = real.iter().map(|v| sigmoid(*v)).collect();
        let p_fake: Vec<f64> = fake.iter().map(|v| sigmoid(*v)).collect();
        let dg = gan_discriminator_loss_grad(&p_real, &p_fake)?;
        let chain = dg
            .wrt_real
            .iter()
            .zip(&p_real)
            .chain(dg.wrt_fake.iter().zip(&p_fake))
            .map(|(g, p)| g * p * (1.0 - p))
            .collect();
        (dg.value, chain)
    };
    if !loss.is_finite() {
        return Ok(loss);
    }
    let grads = tape
        .backward(out, as_seed(seed))?
        .collect_params(&tape, &disc.param_shapes());
    adam.step(disc.params_mut(), &grads, lr);
    Ok(loss)
}

/// A recorded generator forward: the tape and its output node.
pub(crate) struct GeneratorPass<'a> {
    pub tape: &'a Tape,
    pub output: crate::nn::Var,
}

/// One generator update through the (read-only) discriminator; returns the
/// loss terms before the update.
#[allow(clippy::too_many_arguments)]
pub(crate) fn generator_step(
    gen: &mut Model,
    adam: &mut Adam,
    pass: GeneratorPass<'_>,
    disc: &Model,
    hr: &Tensor,
    losses: &GanLosses,
    relativistic: bool,
    lr: f64,
) -> Result<GeneratorTerms> {
    let sr = pass.tape.value(pass.output);
    let mut tape = Tape::new();
    let sr_leaf = tape.leaf(sr.clone());
    let out = disc.forward_tape(&mut tape, sr_leaf, None)?;
    let z_fake = logits_vec(tape.value(out));
    let (terms, mut wrt_sr, z_seed) = if relativistic {
        let z_real = logits_vec(&disc.forward(hr, None)?);
        let eg = esrgan_generator_loss_grad(sr, hr, &z_real, &z_fake, &losses.extractor, &losses.weights)?;
        (eg.terms, eg.wrt_sr, eg.wrt_logits_fake)
    } else {
        let p: Vec<f64> = z_fake.iter().map(|v| sigmoid(*v)).collect();
        let sg = srgan_generator_loss_grad(sr, hr, &p, &losses.extractor)?;
        let chain = sg.wrt_d_prob.iter().zip(&p).map(|(g, p)| g * p * (1.0 - p)).collect();
        (sg.terms, sg.wrt_sr, chain)
    };
    if !terms.total.is_finite() {
        return Ok(terms);
    }
    if let Some(g) = tape.backward(out, as_seed(z_seed))?.wrt(sr_leaf) {
        wrt_sr += g;
    }
    let grads = pass
        .tape
        .backward(pass.output, wrt_sr)?
        .collect_params(pass.tape, &gen.param_shapes());
    adam.step(gen.params_mut(), &grads, lr);
    Ok(terms)
}

/// Alternates one discriminator step and one generator step per batch.
/// An SRGAN discriminator selects the SRGAN objective (perceptual L2 plus
/// `1e-3` adversarial); an ESRGAN discriminator selects the weighted
/// relativistic objective.
pub fn train_gan(
    mut gen: Model,
    mut disc: Model,
    data: &[TrainingPair],
    cfg: &TrainConfig,
    losses: &GanLosses,
) -> Result<GanTrained> {
    if cfg.phase != Phase::Adversarial {
        return Err(Error::config("train_gan needs phase = adversarial"));
    }
    let relativistic = match (gen.arch(), disc.arch()) {
        (Architecture::SrganGenerator(_), Architecture::SrganDiscriminator(_)) => false,
        (Architecture::EsrganGenerator(_), Architecture::EsrganDiscriminator(_)) => true,
        _ => {
            return Err(Error::config(
                "train_gan needs an SRGAN or ESRGAN generator paired with its discriminator",
            ))
        }
    };
    if gen.arch().image_channels() != disc.arch().image_channels() {
        return Err(Error::config("generator and discriminator disagree on image channels"));
    }
    losses.weights.validate()?;
    let start = Instant::now();
    let mut loader = Loader::new(data, cfg, gen.scale())?;
    let mut dropout = seed::rng(seed::stream_seed(cfg.seed, Stream::Dropout));
    let mut adam_g = Adam::new(gen.params(), cfg.beta1, cfg.beta2);
    let mut adam_d = Adam::new(disc.params(), cfg.beta1, cfg.beta2);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    gen.set_mode(Mode::Train);
    disc.set_mode(Mode::Train);
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let mut means = Means::default();
        for (x, hr) in loader.epoch()? {
            let mut g_tape = Tape::new();
            let input = g_tape.constant(x);
            let sr_var = gen.forward_tape(&mut g_tape, input, Some(&mut dropout))?;
            let sr = g_tape.value(sr_var).clone();

            let d_loss = discriminator_step(&mut disc, &mut adam_d, &hr, &sr, relativistic, lr)?;
            guard(epoch, step, "d_loss", d_loss)?;
            let terms = generator_step(
                &mut gen,
                &mut adam_g,
                GeneratorPass {
                    tape: &g_tape,
                    output: sr_var,
                },
                &disc,
                &hr,
                losses,
                relativistic,
                lr,
            )?;
            guard(epoch, step, "g_total", terms.total)?;

            let content = relativistic.then_some(terms.content);
            means.add(
                terms.total,
                content,
                Some(terms.perceptual),
                Some(terms.adversarial),
                Some(d_loss),
            );
            step += 1;
        }
        records.push(means.record(epoch, lr));
    }
    gen.set_mode(Mode::Eval);
    disc.set_mode(Mode::Eval);
    Ok(GanTrained {
        generator: gen,
        discriminator: disc,
        report: TrainReport {
            phase: Phase::Adversarial,
            records,
            steps: step,
            seeds: seeds_of(cfg),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}
