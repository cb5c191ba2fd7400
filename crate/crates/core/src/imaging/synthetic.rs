//! Procedural test images: smooth colour gradients overlaid with a few
//! random sinusoidal gratings and soft discs.

use std::f64::consts::TAU;

use ndarray::Array3;
use rand::Rng;

use super::image::ImageTensor;
use super::pair::{make_pair, PairGeometry, TrainingPair};
use crate::error::Result;
use crate::seed;

/// A smooth `height x width` RGB image drawn from `seed`.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> ImageTensor {
    let mut rng = seed::rng(seed);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.8));
    let slope: [(f64, f64); 3] = std::array::from_fn(|_| (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
    let gratings: Vec<(f64, f64, f64, f64, usize)> = (0..3)
        .map(|_| {
            let freq = rng.random_range(0.5..3.0);
            let angle = rng.random_range(0.0..TAU);
            let phase = rng.random_range(0.0..TAU);
            let amp = rng.random_range(0.05..0.15);
            (
                freq * angle.cos(),
                freq * angle.sin(),
                phase,
                amp,
                rng.random_range(0..3),
            )
        })
        .collect();
    let discs: Vec<(f64, f64, f64, [f64; 3])> = (0..2)
        .map(|_| {
            let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.2..0.2));
            (
                rng.random_range(0.2..0.8),
                rng.random_range(0.2..0.8),
                rng.random_range(0.1..0.3),
                color,
            )
        })
        .collect();
    let data = Array3::from_shape_fn((height, width, 3), |(i, j, c)| {
        let y = (i as f64 + 0.5) / height as f64;
        let x = (j as f64 + 0.5) / width as f64;
        let mut v = base[c] + slope[c].0 * (y - 0.5) + slope[c].1 * (x - 0.5);
        for &(fy, fx, phase, amp, ch) in &gratings {
            if ch == c {
                v += amp * (TAU * (fy * y + fx * x) + phase).sin();
            }
        }
        for &(cy, cx, r, color) in &discs {
            let d = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
            v += color[c] / (1.0 + ((d - r) * 30.0).exp());
        }
        v
    });
    ImageTensor::from_clamped(data).expect("three channels")
}

/// `count` pairs whose HR sides are `geom.hr_size`, seeded from `seed`.
pub fn synthetic_pairs(count: usize, geom: &PairGeometry, seed: u64) -> Result<Vec<TrainingPair>> {
    (0..count)
        .map(|k| {
            let img = synthetic_image(geom.hr_size, geom.hr_size, seed::derive(seed, k as u64));
            make_pair(&img, (0, 0), geom, format!("synthetic{k:03}"))
        })
        .collect()
}
