use ndarray::{s, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::ImageTensor;
use super::resize::bicubic_resize;
use crate::error::{Error, Result};

/// Low-resolution input and its high-resolution ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub lr: ImageTensor,
    pub hr: ImageTensor,
    pub source_id: String,
}

impl TrainingPair {
    pub fn scale(&self) -> usize {
        self.hr.height() / self.lr.height()
    }
}

/// Crop size and downsampling factor used to build pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub hr_size: usize,
    pub scale: usize,
}

impl Default for PairGeometry {
    fn default() -> Self {
        Self { hr_size: 256, scale: 4 }
    }
}

impl PairGeometry {
    pub fn lr_size(&self) -> usize {
        self.hr_size / self.scale
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 || self.hr_size == 0 || !self.hr_size.is_multiple_of(self.scale) {
            return Err(Error::config(format!(
                "hr_size {} must be a positive multiple of scale {}",
                self.hr_size, self.scale
            )));
        }
        Ok(())
    }
}

/// Origin of a centered `size x size` crop.
pub fn center_origin(img: &ImageTensor, size: usize) -> Result<(usize, usize)> {
    if img.height() < size || img.width() < size {
        return Err(Error::Range(format!(
            "{}x{} image is smaller than a {size}x{size} crop",
            img.height(),
            img.width()
        )));
    }
    Ok(((img.height() - size) / 2, (img.width() - size) / 2))
}

/// Crops the HR square at `origin` and derives the LR input by bicubic
/// downsampling.
pub fn make_pair(
    hr_source: &ImageTensor,
    origin: (usize, usize),
    geom: &PairGeometry,
    source_id: impl Into<String>,
) -> Result<TrainingPair> {
    geom.validate()?;
    let hr = hr_source.crop(origin.0, origin.1, geom.hr_size, geom.hr_size)?;
    let lr = bicubic_resize(&hr, geom.lr_size(), geom.lr_size())?;
    Ok(TrainingPair {
        lr,
        hr,
        source_id: source_id.into(),
    })
}

/// Probabilities of the random geometric transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    /// LR-side crop size; `None` keeps the full frame.
    #[serde(default)]
    pub crop_lr: Option<usize>,
    /// Probability of rotating by one of 90, 180 or 270 degrees.
    pub p_rotate: f64,
    pub p_hflip: f64,
    pub p_vflip: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop_lr: None,
            p_rotate: 0.75,
            p_hflip: 0.5,
            p_vflip: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self {
            crop_lr: None,
            p_rotate: 0.0,
            p_hflip: 0.0,
            p_vflip: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_rotate", self.p_rotate),
            ("p_hflip", self.p_hflip),
            ("p_vflip", self.p_vflip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("augment.{name} = {p} is not a probability")));
            }
        }
        if self.crop_lr == Some(0) {
            return Err(Error::config("augment.crop_lr must be positive"));
        }
        Ok(())
    }
}

/// A concrete geometric transform, applied in the order crop, rotate,
/// horizontal flip, vertical flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Transform {
    /// `(row, col, size)` in LR pixels.
    pub crop: Option<(usize, usize, usize)>,
    /// Number of counter-clockwise quarter turns, 0..=3.
    pub quarter_turns: u8,
    pub hflip: bool,
    pub vflip: bool,
}

impl Transform {
    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, lr_h: usize, lr_w: usize, rng: &mut R) -> Result<Self> {
        // every draw happens unconditionally so the stream stays aligned
        let row_u: f64 = rng.random();
        let col_u: f64 = rng.random();
        let rot_u: f64 = rng.random();
        let turns = rng.random_range(1..=3u8);
        let h_u: f64 = rng.random();
        let v_u: f64 = rng.random();
        let crop = match cfg.crop_lr {
            None => None,
            Some(size) if size > lr_h || size > lr_w => {
                return Err(Error::Range(format!(
                    "augment crop {size} exceeds LR frame {lr_h}x{lr_w}"
                )))
            }
            Some(size) => {
                let row = ((lr_h - size + 1) as f64 * row_u).floor() as usize;
                let col = ((lr_w - size + 1) as f64 * col_u).floor() as usize;
                Some((row.min(lr_h - size), col.min(lr_w - size), size))
            }
        };
        Ok(Self {
            crop,
            quarter_turns: if rot_u < cfg.p_rotate { turns } else { 0 },
            hflip: h_u < cfg.p_hflip,
            vflip: v_u < cfg.p_vflip,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.crop.is_none() && self.quarter_turns.is_multiple_of(4) && !self.hflip && !self.vflip
    }

    /// Applies the geometric part (no crop) to one image.
    pub fn apply_geometry(&self, img: &ImageTensor) -> ImageTensor {
        let mut data = img.data().clone();
        for _ in 0..self.quarter_turns % 4 {
            data = rot90(&data);
        }
        if self.hflip {
            data.invert_axis(Axis(1));
            data = data.as_standard_layout().to_owned();
        }
        if self.vflip {
            data.invert_axis(Axis(0));
            data = data.as_standard_layout().to_owned();
        }
        ImageTensor::new(data).expect("geometric transforms preserve the invariants")
    }

    pub fn apply(&self, pair: &TrainingPair) -> Result<TrainingPair> {
        let scale = pair.scale();
        let (lr, hr) = match self.crop {
            Some((r, c, size)) => (
                pair.lr.crop(r, c, size, size)?,
                pair.hr.crop(r * scale, c * scale, size * scale, size * scale)?,
            ),
            None => (pair.lr.clone(), pair.hr.clone()),
        };
        Ok(TrainingPair {
            lr: self.apply_geometry(&lr),
            hr: self.apply_geometry(&hr),
            source_id: pair.source_id.clone(),
        })
    }
}

/// Counter-clockwise quarter turn: `out[i][j] = in[j][w - 1 - i]`.
fn rot90(data: &Array3<f64>) -> Array3<f64> {
    let (h, w, c) = data.dim();
    let mut out = Array3::zeros((w, h, c));
    for i in 0..w {
        for j in 0..h {
            out.slice_mut(s![i, j, ..]).assign(&data.slice(s![j, w - 1 - i, ..]));
        }
    }
    out
}

/// Draws a random transform and applies it identically to both images.
pub fn augment_pair<R: Rng + ?Sized>(pair: &TrainingPair, cfg: &AugmentConfig, rng: &mut R) -> Result<TrainingPair> {
    let t = Transform::sample(cfg, pair.lr.height(), pair.lr.width(), rng)?;
    t.apply(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn textured(h: usize, w: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, 3, |(y, x, c)| ((y * 13 + x * 7 + c * 29) % 101) as f64 / 100.0).unwrap()
    }

    #[test]
    fn pair_dimensions() {
        let src = textured(512, 512);
        let p = make_pair(&src, (0, 0), &PairGeometry::default(), "a").unwrap();
        assert_eq!(p.hr.dims(), (256, 256, 3));
        assert_eq!(p.lr.dims(), (64, 64, 3));
        assert_eq!(p.scale(), 4);
    }

    #[test]
    fn full_frame_crop_is_exact() {
        let src = textured(256, 256);
        let p = make_pair(&src, (0, 0), &PairGeometry::default(), "a").unwrap();
        assert_eq!(p.hr, src);
    }

    #[test]
    fn small_source_is_range_error() {
        let src = textured(200, 200);
        assert!(matches!(
            make_pair(&src, (0, 0), &PairGeometry::default(), "a"),
            Err(Error::Range(_))
        ));
        assert!(matches!(center_origin(&src, 256), Err(Error::Range(_))));
    }

    #[test]
    fn quarter_turn_moves_a_corner_marker_consistently() {
        // marker in the top-left LR pixel and the matching 4x4 HR block
        let mut hr = Array3::from_elem((32, 32, 1), 0.2);
        hr.slice_mut(s![0..4, 0..4, ..]).fill(1.0);
        let hr = ImageTensor::new(hr).unwrap();
        let mut lr = Array3::from_elem((8, 8, 1), 0.2);
        lr[[0, 0, 0]] = 1.0;
        let pair = TrainingPair {
            lr: ImageTensor::new(lr).unwrap(),
            hr,
            source_id: "m".into(),
        };
        let t = Transform {
            quarter_turns: 1,
            ..Default::default()
        };
        let out = t.apply(&pair).unwrap();
        // counter-clockwise: top-left goes to bottom-left
        assert_eq!(out.lr.data()[[7, 0, 0]], 1.0);
        for i in 28..32 {
            for j in 0..4 {
                assert_eq!(out.hr.data()[[i, j, 0]], 1.0);
            }
        }
        assert_eq!(out.hr.data().iter().filter(|v| **v == 1.0).count(), 16);
    }

    #[test]
    fn rotation_commutes_with_downsampling() {
        let hr = textured(64, 64);
        for turns in 1..4u8 {
            let t = Transform {
                quarter_turns: turns,
                ..Default::default()
            };
            let a = bicubic_resize(&t.apply_geometry(&hr), 16, 16).unwrap();
            let b = t.apply_geometry(&bicubic_resize(&hr, 16, 16).unwrap());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn seeded_augmentation_is_deterministic() {
        let pair = make_pair(&textured(64, 64), (0, 0), &PairGeometry { hr_size: 64, scale: 4 }, "x").unwrap();
        let cfg = AugmentConfig {
            crop_lr: Some(8),
            ..Default::default()
        };
        let a = augment_pair(&pair, &cfg, &mut seed::rng(9)).unwrap();
        let b = augment_pair(&pair, &cfg, &mut seed::rng(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hr.height(), 4 * a.lr.height());
    }

    #[test]
    fn zero_probabilities_are_identity() {
        let pair = make_pair(&textured(64, 64), (0, 0), &PairGeometry { hr_size: 64, scale: 4 }, "x").unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..20 {
            assert_eq!(augment_pair(&pair, &AugmentConfig::identity(), &mut rng).unwrap(), pair);
        }
    }

    #[test]
    fn crop_covers_all_origins() {
        let cfg = AugmentConfig {
            crop_lr: Some(3),
            ..AugmentConfig::identity()
        };
        let mut seen = std::collections::HashSet::new();
        let mut rng = seed::rng(1);
        for _ in 0..400 {
            let t = Transform::sample(&cfg, 5, 5, &mut rng).unwrap();
            seen.insert(t.crop.unwrap());
        }
        assert_eq!(seen.len(), 9);
    }
}
