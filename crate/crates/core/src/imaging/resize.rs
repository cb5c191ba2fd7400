//! Separable bicubic resampling.
//!
//! Keys cubic with `a = -0.5` (Catmull-Rom). When shrinking, the kernel is
//! stretched by the scale factor so that every input pixel contributes
//! (antialiasing). Taps that fall outside the image read the nearest edge
//! pixel. Output sample `j` sits at input coordinate `(j + 0.5) * in/out - 0.5`.

use ndarray::Array3;

use super::image::{clamp_unit, ImageTensor};
use crate::error::{Error, Result};

const A: f64 = -0.5;

/// The cubic convolution kernel.
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

struct Taps {
    index: Vec<usize>,
    weight: Vec<f64>,
}

fn taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let support = scale.max(1.0);
    let radius = 2.0 * support;
    (0..out_len)
        .map(|j| {
            let center = (j as f64 + 0.5) * scale - 0.5;
            let lo = (center - radius).floor() as isize;
            let hi = (center + radius).ceil() as isize;
            let mut index = Vec::with_capacity((hi - lo + 1) as usize);
            let mut weight = Vec::with_capacity(index.capacity());
            for i in lo..=hi {
                let w = cubic_kernel((i as f64 - center) / support);
                if w != 0.0 {
                    index.push(i.clamp(0, in_len as isize - 1) as usize);
                    weight.push(w);
                }
            }
            let total: f64 = weight.iter().sum();
            weight.iter_mut().for_each(|w| *w /= total);
            Taps { index, weight }
        })
        .collect()
}

/// Resizes to `out_h x out_w`; results are clamped to `[0, 1]`.
pub fn bicubic_resize(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Range(format!("target size {out_h}x{out_w}")));
    }
    let (h, w, c) = img.dims();
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let src = img.data();

    let cols = taps(w, out_w);
    let mut horiz = Array3::<f64>::zeros((h, out_w, c));
    for y in 0..h {
        for (x, t) in cols.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, wt) in t.index.iter().zip(&t.weight) {
                    acc += wt * src[[y, *i, ch]];
                }
                horiz[[y, x, ch]] = acc;
            }
        }
    }

    let rows = taps(h, out_h);
    let mut out = Array3::<f64>::zeros((out_h, out_w, c));
    for (y, t) in rows.iter().enumerate() {
        for x in 0..out_w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, wt) in t.index.iter().zip(&t.weight) {
                    acc += wt * horiz[[*i, x, ch]];
                }
                out[[y, x, ch]] = clamp_unit(acc);
            }
        }
    }
    ImageTensor::new(out)
}
