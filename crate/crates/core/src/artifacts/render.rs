//! Visualizations of a standard-deviation map: a 16-bit grayscale image and
//! an inferno heat overlay blended onto the super-resolved image.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use super::colormap::INFERNO;
use super::sidecar::SigmaSidecar;
use crate::error::{Error, Result};
use crate::imaging::{save_gray16, to_u8, ImageTensor};

/// Blend weight of the heat map.
pub const OVERLAY_ALPHA: f64 = 0.5;

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Maps `values` linearly from `[0, max]` onto `[0, levels]`; an all-zero
/// map stays zero.
fn quantize(values: &[f64], levels: f64) -> Vec<f64> {
    let max = max_of(values);
    values
        .iter()
        .map(|v| if max > 0.0 { (v / max * levels).round() } else { 0.0 })
        .collect()
}

/// Channel-mean sigma as 16-bit levels, linearly mapped over `[0, max]`.
pub fn sigma_gray16(sidecar: &SigmaSidecar) -> Vec<u16> {
    quantize(&sidecar.channel_mean(), 65535.0)
        .into_iter()
        .map(|v| v as u16)
        .collect()
}

pub fn save_sigma_png(sidecar: &SigmaSidecar, path: &Path) -> Result<()> {
    let (h, w, _) = sidecar.dims();
    save_gray16(w, h, &sigma_gray16(sidecar), path)
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<u8>,
}

impl Rgb8 {
    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn of_image(img: &ImageTensor) -> Self {
        let (h, w, c) = img.dims();
        let d = img.data();
        let mut pixels = Vec::with_capacity(3 * h * w);
        for y in 0..h {
            for x in 0..w {
                for k in 0..3 {
                    pixels.push(to_u8(d[[y, x, k.min(c - 1)]]));
                }
            }
        }
        Self {
            width: w,
            height: h,
            pixels,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .ok_or_else(|| Error::shape("RGB buffer size mismatch"))?;
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
    }
}

/// Inferno colors of the channel-mean sigma, scaled over `[0, max]`.
pub fn heatmap(sidecar: &SigmaSidecar) -> Rgb8 {
    let (h, w, _) = sidecar.dims();
    let pixels = quantize(&sidecar.channel_mean(), 255.0)
        .into_iter()
        .flat_map(|v| INFERNO[v as usize])
        .collect();
    Rgb8 {
        width: w,
        height: h,
        pixels,
    }
}

/// `round((1 - alpha) * sr + alpha * heat)` per 8-bit channel.
pub fn render_overlay(sr: &ImageTensor, sidecar: &SigmaSidecar) -> Result<Rgb8> {
    let (h, w, _) = sr.dims();
    let (sh, sw, _) = sidecar.dims();
    if (h, w) != (sh, sw) {
        return Err(Error::shape(format!("image is {h}x{w}, uncertainty map is {sh}x{sw}")));
    }
    let base = Rgb8::of_image(sr);
    let heat = heatmap(sidecar);
    let pixels = base
        .pixels
        .iter()
        .zip(&heat.pixels)
        .map(|(&a, &b)| ((1.0 - OVERLAY_ALPHA) * f64::from(a) + OVERLAY_ALPHA * f64::from(b)).round() as u8)
        .collect();
    Ok(Rgb8 { pixels, ..base })
}

/// Places `original | sr | overlay` side by side.
pub fn render_panel(original: &ImageTensor, sr: &ImageTensor, overlay: &Rgb8) -> Result<Rgb8> {
    let (h, w, _) = sr.dims();
    if original.dims().0 != h || original.dims().1 != w || overlay.height != h || overlay.width != w {
        return Err(Error::shape("panel inputs differ in size"));
    }
    let tiles = [Rgb8::of_image(original), Rgb8::of_image(sr), overlay.clone()];
    let mut pixels = Vec::with_capacity(9 * h * w);
    for y in 0..h {
        for t in &tiles {
            pixels.extend_from_slice(&t.pixels[3 * y * w..3 * (y + 1) * w]);
        }
    }
    Ok(Rgb8 {
        width: 3 * w,
        height: h,
        pixels,
    })
}
