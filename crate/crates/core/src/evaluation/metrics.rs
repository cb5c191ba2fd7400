use ndarray::{Array2, Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;

/// Gaussian-window SSIM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.sigma.is_nan() || self.sigma <= 0.0 || self.k1 < 0.0 || self.k2 < 0.0 {
            return Err(Error::config(
                "ssim window must be positive with sigma > 0 and k1, k2 >= 0",
            ));
        }
        Ok(())
    }

    /// Normalized 2-D Gaussian weights.
    fn weights(&self) -> Array2<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let g: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let mut w = Array2::from_shape_fn((self.window, self.window), |(i, j)| g[i] * g[j]);
        let total = w.sum();
        w.mapv_inplace(|v| v / total);
        w
    }
}

/// Settings shared by all image metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub data_range: f64,
    /// Compare BT.601 luma instead of all channels.
    pub luminance: bool,
    pub ssim: SsimConfig,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            data_range: 1.0,
            luminance: false,
            ssim: SsimConfig::default(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        check_range(self.data_range)?;
        self.ssim.validate()
    }
}

fn check_range(data_range: f64) -> Result<()> {
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::config(format!("data range {data_range} must be positive")));
    }
    Ok(())
}

fn same_dims(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// BT.601 luma of an RGB image; single-channel images are returned as is.
pub fn luminance(img: &ImageTensor) -> ImageTensor {
    if img.channels() == 1 {
        return img.clone();
    }
    let d = img.data();
    let y = Array3::from_shape_fn((img.height(), img.width(), 1), |(i, j, _)| {
        0.299 * d[[i, j, 0]] + 0.587 * d[[i, j, 1]] + 0.114 * d[[i, j, 2]]
    });
    ImageTensor::from_clamped(y).expect("valid dims")
}

/// `10 log10(range^2 / MSE)`; `+inf` for identical images.
pub fn psnr(a: &ImageTensor, b: &ImageTensor, data_range: f64) -> Result<f64> {
    same_dims(a, b)?;
    check_range(data_range)?;
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

fn window_stats(a: ArrayView3<f64>, b: ArrayView3<f64>, w: &Array2<f64>, (i, j, c): (usize, usize, usize)) -> [f64; 5] {
    let k = w.dim().0;
    let (mut ma, mut mb) = (0.0, 0.0);
    for u in 0..k {
        for v in 0..k {
            let wt = w[[u, v]];
            ma += wt * a[[i + u, j + v, c]];
            mb += wt * b[[i + u, j + v, c]];
        }
    }
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for u in 0..k {
        for v in 0..k {
            let wt = w[[u, v]];
            let da = a[[i + u, j + v, c]] - ma;
            let db = b[[i + u, j + v, c]] - mb;
            va += wt * (da * da);
            vb += wt * (db * db);
            cov += wt * (da * db);
        }
    }
    [ma, mb, va, vb, cov]
}

/// Mean SSIM over every fully contained window and every channel.
pub fn ssim(a: &ImageTensor, b: &ImageTensor, cfg: &SsimConfig, data_range: f64) -> Result<f64> {
    same_dims(a, b)?;
    check_range(data_range)?;
    cfg.validate()?;
    let (h, w, ch) = a.dims();
    if h < cfg.window || w < cfg.window {
        return Err(Error::config(format!(
            "{h}x{w} image is smaller than the {0}x{0} ssim window",
            cfg.window
        )));
    }
    let weights = cfg.weights();
    let c1 = (cfg.k1 * data_range).powi(2);
    let c2 = (cfg.k2 * data_range).powi(2);
    let (oh, ow) = (h - cfg.window + 1, w - cfg.window + 1);
    let mut total = 0.0;
    for c in 0..ch {
        for i in 0..oh {
            for j in 0..ow {
                let [ma, mb, va, vb, cov] = window_stats(a.view(), b.view(), &weights, (i, j, c));
                let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                total += num / den;
            }
        }
    }
    Ok(total / (oh * ow * ch) as f64)
}

/// Elementwise `|a - b|`.
pub fn mae_map(a: &ImageTensor, b: &ImageTensor) -> Result<Array3<f64>> {
    same_dims(a, b)?;
    Ok((a.data() - b.data()).mapv(f64::abs))
}

pub fn mae(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(mae_map(a, b)?.mean().unwrap_or(0.0))
}
