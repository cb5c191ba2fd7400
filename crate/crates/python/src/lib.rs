//! Python bindings.
//!
//! Images cross the boundary as nested lists indexed `[row][col][channel]`
//! with intensities in `[0, 1]`.

use std::path::PathBuf;

use ndarray::Array3;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use srunc_core::artifacts::Checkpoint;
use srunc_core::evaluation::{self, SsimConfig};
use srunc_core::imaging;
use srunc_core::training::{self, TrainConfig};
use srunc_core::uncertainty::{self, SampleSource, SampleStack, StdMode, UncertaintyMap};
use srunc_core::{Error, ImageTensor, Model};

type Nested = Vec<Vec<Vec<f64>>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_array(img: Nested) -> PyResult<Array3<f64>> {
    let h = img.len();
    let w = img.first().map_or(0, Vec::len);
    let c = img.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let flat: Vec<f64> = img.into_iter().flatten().flatten().collect();
    Array3::from_shape_vec((h, w, c), flat)
        .map_err(|_| PyValueError::new_err("image rows must all have the same shape"))
}

fn to_image(img: Nested) -> PyResult<ImageTensor> {
    ImageTensor::new(to_array(img)?).map_err(py_err)
}

fn to_nested(a: &Array3<f64>) -> Nested {
    a.outer_iter()
        .map(|row| row.outer_iter().map(|px| px.to_vec()).collect())
        .collect()
}

fn parse_mode(mode: &str) -> PyResult<StdMode> {
    mode.parse().map_err(py_err)
}

fn mean_and_sigma(stack: &SampleStack, mode: StdMode) -> (Nested, Nested) {
    let mu = uncertainty::aggregate_mean(stack);
    let umap = uncertainty::aggregate_std(stack, mode);
    (to_nested(mu.data()), to_nested(umap.sigma()))
}

/// Peak signal-to-noise ratio in dB; `inf` for identical images.
#[pyfunction]
#[pyo3(signature = (a, b, data_range = 1.0))]
fn psnr(a: Nested, b: Nested, data_range: f64) -> PyResult<f64> {
    evaluation::psnr(&to_image(a)?, &to_image(b)?, data_range).map_err(py_err)
}

/// Gaussian-window SSIM (11x11, sigma 1.5).
#[pyfunction]
#[pyo3(signature = (a, b, data_range = 1.0))]
fn ssim(a: Nested, b: Nested, data_range: f64) -> PyResult<f64> {
    evaluation::ssim(&to_image(a)?, &to_image(b)?, &SsimConfig::default(), data_range).map_err(py_err)
}

#[pyfunction]
fn mae(a: Nested, b: Nested) -> PyResult<f64> {
    evaluation::mae(&to_image(a)?, &to_image(b)?).map_err(py_err)
}

/// Per-pixel mean and standard deviation of a list of samples.
/// `mode` is `"paper_eq7"` or `"sample_std"`.
#[pyfunction]
#[pyo3(signature = (samples, mode = "paper_eq7"))]
fn aggregate(samples: Vec<Nested>, mode: &str) -> PyResult<(Nested, Nested)> {
    let mode = parse_mode(mode)?;
    let images = samples.into_iter().map(to_image).collect::<PyResult<Vec<_>>>()?;
    let stack = SampleStack::new(images, SampleSource::Mcd, Vec::new()).map_err(py_err)?;
    Ok(mean_and_sigma(&stack, mode))
}

/// `(level, mean_error, count)` for thresholds spaced over `[min, max]` of
/// `sigma`, counting pixels with `sigma >= level`.
#[pyfunction]
#[pyo3(signature = (sigma, error, n_thresholds = evaluation::DEFAULT_THRESHOLDS))]
fn threshold_sweep(sigma: Nested, error: Nested, n_thresholds: usize) -> PyResult<Vec<(f64, f64, usize)>> {
    let umap = UncertaintyMap::from_sigma(to_array(sigma)?, StdMode::default(), 1).map_err(py_err)?;
    let curve = evaluation::threshold_sweep(&umap, &to_array(error)?, n_thresholds).map_err(py_err)?;
    Ok(curve.points.iter().map(|p| (p.level, p.mean_error, p.count)).collect())
}

/// Step-decay learning rate.
#[pyfunction]
#[pyo3(signature = (epoch, lr0 = 1e-4, milestones = vec![25, 50, 100, 150], decay_factor = 2.0))]
fn lr_at(epoch: usize, lr0: f64, milestones: Vec<usize>, decay_factor: f64) -> PyResult<f64> {
    let cfg = TrainConfig {
        lr0,
        milestones,
        decay_factor,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(py_err)?;
    Ok(training::lr_at(epoch, &cfg))
}

#[pyfunction]
fn load_image(path: PathBuf) -> PyResult<Nested> {
    Ok(to_nested(imaging::load_image(path).map_err(py_err)?.data()))
}

#[pyfunction]
fn save_image(image: Nested, path: PathBuf) -> PyResult<()> {
    imaging::save_image(&to_image(image)?, path).map_err(py_err)
}

/// A generator restored from a checkpoint.
#[pyclass(frozen)]
struct Generator {
    model: Model,
}

#[pymethods]
impl Generator {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let model = Checkpoint::load(&path).and_then(|c| c.to_model()).map_err(py_err)?;
        if !model.is_generator() {
            return Err(PyValueError::new_err(format!(
                "{} holds a discriminator",
                path.display()
            )));
        }
        Ok(Self { model })
    }

    #[getter]
    fn scale(&self) -> usize {
        self.model.scale()
    }

    /// One deterministic forward pass.
    fn upscale(&self, py: Python<'_>, image: Nested) -> PyResult<Nested> {
        let lr = to_image(image)?;
        let sr = py
            .allow_threads(|| {
                let out = self
                    .model
                    .forward(&ImageTensor::to_batch(std::slice::from_ref(&lr))?, None)?;
                ImageTensor::from_batch(&out)
            })
            .map_err(py_err)?;
        Ok(to_nested(sr[0].data()))
    }

    /// Mean and standard deviation of `samples` dropout-perturbed forwards.
    #[pyo3(signature = (image, samples = uncertainty::DEFAULT_MCD_SAMPLES, seed = 0, mode = "paper_eq7"))]
    fn mc_dropout(
        &self,
        py: Python<'_>,
        image: Nested,
        samples: usize,
        seed: u64,
        mode: &str,
    ) -> PyResult<(Nested, Nested)> {
        let mode = parse_mode(mode)?;
        let lr = to_image(image)?;
        let stack = py
            .allow_threads(|| uncertainty::mc_dropout_sample(&self.model, &lr, samples, seed))
            .map_err(py_err)?;
        Ok(mean_and_sigma(&stack, mode))
    }

    fn __repr__(&self) -> String {
        format!(
            "Generator({:?}, {} parameters)",
            self.model.arch(),
            self.model.param_count()
        )
    }
}

#[pymodule]
pub fn srunc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(lr_at, m)?)?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(save_image, m)?)?;
    m.add_class::<Generator>()?;
    Ok(())
}
