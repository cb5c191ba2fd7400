use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::sample::SampleStack;
use crate::imaging::ImageTensor;

/// Normalization of the per-pixel spread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    /// `sqrt(sum (y - mu)^2 / M^2)`, the standard deviation of the mean.
    #[default]
    PaperEq7,
    /// `sqrt(sum (y - mu)^2 / M)`, the population standard deviation.
    SampleStd,
}

impl StdMode {
    pub fn code(self) -> u32 {
        match self {
            StdMode::PaperEq7 => 0,
            StdMode::SampleStd => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(StdMode::PaperEq7),
            1 => Some(StdMode::SampleStd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StdMode::PaperEq7 => "paper_eq7",
            StdMode::SampleStd => "sample_std",
        }
    }
}

impl std::str::FromStr for StdMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "paper_eq7" => Ok(StdMode::PaperEq7),
            "sample_std" => Ok(StdMode::SampleStd),
            _ => Err(crate::Error::Config(format!("unknown std mode {s:?}"))),
        }
    }
}

/// Per-pixel standard deviation and its image-level mean `sigma_mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    sigma: Array3<f64>,
    sigma_mean: f64,
    mode: StdMode,
    samples: usize,
}

impl UncertaintyMap {
    /// Rebuilds a map from stored values (for example a sidecar file).
    pub fn from_sigma(sigma: Array3<f64>, mode: StdMode, samples: usize) -> crate::Result<Self> {
        if sigma.is_empty() {
            return Err(crate::Error::Shape("empty uncertainty map".into()));
        }
        if sigma.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(crate::Error::Domain("sigma must be finite and non-negative".into()));
        }
        let sigma_mean = sigma.iter().sum::<f64>() / sigma.len() as f64;
        Ok(Self {
            sigma,
            sigma_mean,
            mode,
            samples,
        })
    }

    /// `H x W x C` standard deviations.
    pub fn sigma(&self) -> &Array3<f64> {
        &self.sigma
    }

    pub fn sigma_mean(&self) -> f64 {
        self.sigma_mean
    }

    pub fn mode(&self) -> StdMode {
        self.mode
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.sigma.dim()
    }
}

/// Calls `f(sorted values)` for every pixel and collects the results.
fn per_pixel(stack: &SampleStack, mut f: impl FnMut(&[f64]) -> f64) -> Array3<f64> {
    let dims = stack.dims();
    let views: Vec<_> = stack.samples().iter().map(ImageTensor::view).collect();
    let mut buf = vec![0.0; views.len()];
    Array3::from_shape_fn(dims, |idx| {
        for (b, v) in buf.iter_mut().zip(&views) {
            *b = v[idx];
        }
        buf.sort_by(f64::total_cmp);
        f(&buf)
    })
}

/// Mean of ascending `values`, accumulated as offsets from the minimum so
/// that equal values return that value exactly.
fn mean(values: &[f64]) -> f64 {
    let lo = values[0];
    lo + values.iter().map(|v| v - lo).sum::<f64>() / values.len() as f64
}

/// Per-pixel arithmetic mean of the samples.
pub fn aggregate_mean(stack: &SampleStack) -> ImageTensor {
    ImageTensor::from_clamped(per_pixel(stack, mean)).expect("stack dims are valid image dims")
}

/// Per-pixel spread of the samples around their mean.
pub fn aggregate_std(stack: &SampleStack, mode: StdMode) -> UncertaintyMap {
    let m = stack.len() as f64;
    let denom = match mode {
        StdMode::PaperEq7 => m * m,
        StdMode::SampleStd => m,
    };
    let sigma = per_pixel(stack, |v| {
        let mu = mean(v);
        let ss: f64 = v.iter().map(|y| (y - mu) * (y - mu)).sum();
        (ss / denom).sqrt()
    });
    let sigma_mean = sigma.iter().sum::<f64>() / sigma.len() as f64;
    UncertaintyMap {
        sigma,
        sigma_mean,
        mode,
        samples: stack.len(),
    }
}
