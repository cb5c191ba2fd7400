use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use ndarray::{s, Array3, Array4, ArrayView3, Axis};

use crate::error::{Error, Result};

/// An H x W x C image with intensities in `[0, 1]`, C in {1, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Array3<f64>,
}

impl ImageTensor {
    /// Wraps `data` (height, width, channels) after checking the invariants.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (h, w, c) = data.dim();
        if h == 0 || w == 0 {
            return Err(Error::shape(format!("empty image {h}x{w}")));
        }
        if c != 1 && c != 3 {
            return Err(Error::Format(format!("unsupported channel count {c}")));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::Domain(format!("intensity {v} outside [0,1]")));
        }
        Ok(Self { data })
    }

    /// Clamps every element into `[0, 1]` (non-finite values become 0).
    pub fn from_clamped(mut data: Array3<f64>) -> Result<Self> {
        data.mapv_inplace(clamp_unit);
        Self::new(data)
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(Array3::from_elem((height, width, channels), value))
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl FnMut((usize, usize, usize)) -> f64,
    ) -> Result<Self> {
        Self::new(Array3::from_shape_fn((height, width, channels), f))
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView3<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    /// Clamps a single intensity into `[0, 1]`; NaN maps to 0.
    pub fn clamp_value(v: f64) -> f64 {
        clamp_unit(v)
    }

    /// Crops `height x width` starting at `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height() || col + width > self.width() {
            return Err(Error::Range(format!(
                "crop {height}x{width} at ({row},{col}) exceeds {}x{}",
                self.height(),
                self.width()
            )));
        }
        Ok(Self {
            data: self.data.slice(s![row..row + height, col..col + width, ..]).to_owned(),
        })
    }

    /// Stacks images into an `N x C x H x W` batch.
    pub fn to_batch(images: &[ImageTensor]) -> Result<Array4<f64>> {
        let first = images.first().ok_or_else(|| Error::shape("cannot batch zero images"))?;
        let (h, w, c) = first.dims();
        let mut out = Array4::zeros((images.len(), c, h, w));
        for (n, img) in images.iter().enumerate() {
            if img.dims() != (h, w, c) {
                return Err(Error::shape(format!(
                    "batch member {n} is {:?}, expected {:?}",
                    img.dims(),
                    (h, w, c)
                )));
            }
            out.index_axis_mut(Axis(0), n)
                .assign(&img.data.view().permuted_axes([2, 0, 1]));
        }
        Ok(out)
    }

    /// Splits an `N x C x H x W` batch back into images, clamping to `[0, 1]`.
    pub fn from_batch(batch: &Array4<f64>) -> Result<Vec<ImageTensor>> {
        batch
            .axis_iter(Axis(0))
            .map(|chw| Self::from_clamped(chw.permuted_axes([1, 2, 0]).to_owned()))
            .collect()
    }
}

pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn decode_error(path: &Path, err: image::ImageError) -> Error {
    match err {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, other.to_string()),
        ),
    }
}

/// Decodes a raster file into `[0, 1]` intensities (8-bit values are divided
/// by 255, 16-bit by 65535).
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| decode_error(path, e))?;
    from_dynamic(&img)
}

fn from_dynamic(img: &DynamicImage) -> Result<ImageTensor> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(buf) => Array3::from_shape_fn((h, w, 1), |(y, x, _)| {
            f64::from(buf.get_pixel(x as u32, y as u32)[0]) / 255.0
        }),
        DynamicImage::ImageLuma16(buf) => Array3::from_shape_fn((h, w, 1), |(y, x, _)| {
            f64::from(buf.get_pixel(x as u32, y as u32)[0]) / 65535.0
        }),
        DynamicImage::ImageRgb8(buf) => Array3::from_shape_fn((h, w, 3), |(y, x, c)| {
            f64::from(buf.get_pixel(x as u32, y as u32)[c]) / 255.0
        }),
        DynamicImage::ImageRgb16(buf) => Array3::from_shape_fn((h, w, 3), |(y, x, c)| {
            f64::from(buf.get_pixel(x as u32, y as u32)[c]) / 65535.0
        }),
        other => {
            return Err(Error::Format(format!(
                "unsupported pixel layout {:?} ({} channels)",
                other.color(),
                other.color().channel_count()
            )))
        }
    };
    ImageTensor::new(data)
}

/// Quantizes to 8 bits per channel (`round(v * 255)`).
pub fn to_u8(v: f64) -> u8 {
    (clamp_unit(v) * 255.0).round() as u8
}

/// Writes an 8-bit PNG (grayscale or RGB depending on the channel count).
pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w, c) = img.dims();
    let d = img.data();
    let result = if c == 1 {
        ImageBuffer::<Luma<u8>, _>::from_fn(w as u32, h as u32, |x, y| Luma([to_u8(d[[y as usize, x as usize, 0]])]))
            .save_with_format(path, image::ImageFormat::Png)
    } else {
        ImageBuffer::<Rgb<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
            let (y, x) = (y as usize, x as usize);
            Rgb([to_u8(d[[y, x, 0]]), to_u8(d[[y, x, 1]]), to_u8(d[[y, x, 2]])])
        })
        .save_with_format(path, image::ImageFormat::Png)
    };
    result.map_err(|e| decode_error(path, e))
}

/// Writes raw 16-bit grayscale samples as a PNG.
pub fn save_gray16(width: usize, height: usize, pixels: &[u16], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if pixels.len() != width * height {
        return Err(Error::shape(format!(
            "{} samples for a {width}x{height} image",
            pixels.len()
        )));
    }
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(width as u32, height as u32, pixels.to_vec())
        .ok_or_else(|| Error::shape("16-bit buffer size mismatch"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| decode_error(path, e))
}
