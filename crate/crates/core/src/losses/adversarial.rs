use super::EPS;
use crate::error::{Error, Result};
use crate::models::sigmoid;

fn check_probs(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty probability batch".into()));
    }
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::Domain(format!("{v} is not a probability"))),
        None => Ok(()),
    }
}

fn check_logits(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Domain("empty logit batch".into()));
    }
    match z.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::Domain(format!("non-finite logit {v}"))),
        None => Ok(()),
    }
}

/// `-log(clamp(p))` and its derivative in `p`.
fn neg_log(p: f64) -> (f64, f64) {
    let c = p.clamp(EPS, 1.0 - EPS);
    let d = if p == c { -1.0 / c } else { 0.0 };
    (-c.ln(), d)
}

/// `mean(-log d)` over the discriminator's probabilities for SR images.
pub fn srgan_adv(d_prob_sr: &[f64]) -> Result<f64> {
    Ok(srgan_adv_grad(d_prob_sr)?.0)
}

pub fn srgan_adv_grad(d_prob_sr: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_probs(d_prob_sr)?;
    let n = d_prob_sr.len() as f64;
    let mut total = 0.0;
    let grad = d_prob_sr
        .iter()
        .map(|p| {
            let (v, d) = neg_log(*p);
            total += v;
            d / n
        })
        .collect();
    Ok((total / n, grad))
}

pub struct GanDiscriminatorGrad {
    pub value: f64,
    pub wrt_real: Vec<f64>,
    pub wrt_fake: Vec<f64>,
}

/// `mean(-log d_real) + mean(-log(1 - d_fake))`.
pub fn gan_discriminator_loss(d_prob_real: &[f64], d_prob_fake: &[f64]) -> Result<f64> {
    Ok(gan_discriminator_loss_grad(d_prob_real, d_prob_fake)?.value)
}

pub fn gan_discriminator_loss_grad(d_prob_real: &[f64], d_prob_fake: &[f64]) -> Result<GanDiscriminatorGrad> {
    check_probs(d_prob_real)?;
    check_probs(d_prob_fake)?;
    let (nr, nf) = (d_prob_real.len() as f64, d_prob_fake.len() as f64);
    let mut value = 0.0;
    let wrt_real = d_prob_real
        .iter()
        .map(|p| {
            let (v, d) = neg_log(*p);
            value += v / nr;
            d / nr
        })
        .collect();
    let wrt_fake = d_prob_fake
        .iter()
        .map(|p| {
            let (v, d) = neg_log(1.0 - *p);
            value += v / nf;
            -d / nf
        })
        .collect();
    Ok(GanDiscriminatorGrad {
        value,
        wrt_real,
        wrt_fake,
    })
}

/// Relativistic-average adversarial losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaganLosses {
    pub gen_adv: f64,
    pub disc: f64,
}

pub struct RaganGrads {
    pub losses: RaganLosses,
    pub gen_wrt_real: Vec<f64>,
    pub gen_wrt_fake: Vec<f64>,
    pub disc_wrt_real: Vec<f64>,
    pub disc_wrt_fake: Vec<f64>,
}

/// With `D(a, b) = sigmoid(C(a) - mean C(b))`:
/// `disc = -mean log D(real, fake) - mean log(1 - D(fake, real))` and
/// `gen_adv = -mean log(1 - D(real, fake)) - mean log D(fake, real)`.
pub fn ragan_losses(logits_real: &[f64], logits_fake: &[f64]) -> Result<RaganLosses> {
    Ok(ragan_grads(logits_real, logits_fake)?.losses)
}

pub fn ragan_grads(logits_real: &[f64], logits_fake: &[f64]) -> Result<RaganGrads> {
    check_logits(logits_real)?;
    check_logits(logits_fake)?;
    let (nr, nf) = (logits_real.len() as f64, logits_fake.len() as f64);
    let mean_r = logits_real.iter().sum::<f64>() / nr;
    let mean_f = logits_fake.iter().sum::<f64>() / nf;

    // Each term is summed on its own so that exchanging the batches swaps
    // the two losses bit for bit.
    let (mut disc_r, mut disc_f, mut gen_r, mut gen_f) = (0.0, 0.0, 0.0, 0.0);
    // derivatives with respect to the relativistic scores
    let mut g_rf = Vec::with_capacity(logits_real.len());
    let mut d_rf = Vec::with_capacity(logits_real.len());
    for r in logits_real {
        let p = sigmoid(r - mean_f);
        let (dv, dd) = neg_log(p);
        let (gv, gd) = neg_log(1.0 - p);
        let dp = p * (1.0 - p);
        disc_r += dv;
        gen_r += gv;
        d_rf.push(dd * dp / nr);
        g_rf.push(-gd * dp / nr);
    }
    let mut g_fr = Vec::with_capacity(logits_fake.len());
    let mut d_fr = Vec::with_capacity(logits_fake.len());
    for f in logits_fake {
        let p = sigmoid(f - mean_r);
        let (dv, dd) = neg_log(1.0 - p);
        let (gv, gd) = neg_log(p);
        let dp = p * (1.0 - p);
        disc_f += dv;
        gen_f += gv;
        d_fr.push(-dd * dp / nf);
        g_fr.push(gd * dp / nf);
    }

    let losses = RaganLosses {
        disc: disc_r / nr + disc_f / nf,
        gen_adv: gen_r / nr + gen_f / nf,
    };

    // z_rf[i] = r_i - mean(f), z_fr[j] = f_j - mean(r)
    let chain = |s_rf: &[f64], s_fr: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let sum_rf: f64 = s_rf.iter().sum();
        let sum_fr: f64 = s_fr.iter().sum();
        let wrt_real = s_rf.iter().map(|s| s - sum_fr / nr).collect();
        let wrt_fake = s_fr.iter().map(|s| s - sum_rf / nf).collect();
        (wrt_real, wrt_fake)
    };
    let (gen_wrt_real, gen_wrt_fake) = chain(&g_rf, &g_fr);
    let (disc_wrt_real, disc_wrt_fake) = chain(&d_rf, &d_fr);
    Ok(RaganGrads {
        losses,
        gen_wrt_real,
        gen_wrt_fake,
        disc_wrt_real,
        disc_wrt_fake,
    })
}
