use serde::{Deserialize, Serialize};

use ndarray::Array3;

use super::calibration::{binned_calibration, threshold_sweep, CalibrationCurve, DEFAULT_BINS, DEFAULT_THRESHOLDS};
use super::metrics::{luminance, mae, mae_map, psnr, ssim, MetricConfig};
use crate::error::{Error, Result};
use crate::imaging::{DatasetManifest, TrainingPair};
use crate::uncertainty::{aggregate_mean, aggregate_std, Sampler, StdMode, UncertaintyMap};

/// Metrics of one evaluated image. `psnr_db` is `+inf` for a perfect
/// reconstruction and is written as `inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub image_id: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mae: f64,
    pub sigma_mean: f64,
}

impl MetricReport {
    /// CSV with columns `image_id,psnr_db,ssim,mae,sigma_mean`.
    pub fn to_csv(reports: &[MetricReport]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["image_id", "psnr_db", "ssim", "mae", "sigma_mean"])
            .map_err(err)?;
        for r in reports {
            w.write_record([
                r.image_id.clone(),
                r.psnr_db.to_string(),
                r.ssim.to_string(),
                r.mae.to_string(),
                r.sigma_mean.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Vec<MetricReport>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["image_id", "psnr_db", "ssim", "mae", "sigma_mean"] {
            return Err(Error::Format(format!("unexpected metric header {headers:?}")));
        }
        r.deserialize()
            .map(|rec| rec.map_err(|e: csv::Error| Error::Format(e.to_string())))
            .collect()
    }
}

/// Means of the per-image metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub count: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mae: f64,
    pub sigma_mean: f64,
}

impl MetricSummary {
    pub fn of(reports: &[MetricReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(Self {
            count: reports.len(),
            psnr_db: mean(|r| r.psnr_db),
            ssim: mean(|r| r.ssim),
            mae: mean(|r| r.mae),
            sigma_mean: mean(|r| r.sigma_mean),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub metrics: MetricConfig,
    pub std_mode: StdMode,
    /// Upper bound on calibration bins; fewer are used for small sets.
    pub n_bins: usize,
    pub n_thresholds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metrics: MetricConfig::default(),
            std_mode: StdMode::default(),
            n_bins: DEFAULT_BINS,
            n_thresholds: DEFAULT_THRESHOLDS,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::config("n_bins must be positive"));
        }
        if self.n_thresholds < 2 {
            return Err(Error::config("n_thresholds must be at least 2"));
        }
        self.metrics.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub reports: Vec<MetricReport>,
    pub summary: MetricSummary,
    /// Per-image `sigma_mean` binned against per-image MAE.
    pub curve: CalibrationCurve,
    /// Threshold sweep over the pooled pixels of every image (all
    /// channels).
    pub sweep: CalibrationCurve,
}

/// Super-resolves every pair's LR input with `sampler`, scores the sample
/// mean against the HR target and bins `sigma_mean` against MAE.
pub fn evaluate_pairs(sampler: &dyn Sampler, pairs: &[TrainingPair], cfg: &EvalConfig) -> Result<EvalOutcome> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::config("evaluation set is empty"));
    }
    let m = &cfg.metrics;
    let mut reports = Vec::with_capacity(pairs.len());
    let (mut sigma_px, mut err_px) = (Vec::new(), Vec::new());
    let mut samples = 1;
    for pair in pairs {
        let stack = sampler.sample(&pair.lr)?;
        let mu = aggregate_mean(&stack);
        let umap = aggregate_std(&stack, cfg.std_mode);
        if mu.dims() != pair.hr.dims() {
            return Err(Error::Shape(format!(
                "{}: prediction {:?} vs target {:?}",
                pair.source_id,
                mu.dims(),
                pair.hr.dims()
            )));
        }
        sigma_px.extend(umap.sigma().iter().copied());
        err_px.extend(mae_map(&mu, &pair.hr)?.iter().copied());
        samples = umap.samples();
        let (a, b) = if m.luminance {
            (luminance(&mu), luminance(&pair.hr))
        } else {
            (mu, pair.hr.clone())
        };
        reports.push(MetricReport {
            image_id: pair.source_id.clone(),
            psnr_db: psnr(&a, &b, m.data_range)?,
            ssim: ssim(&a, &b, &m.ssim, m.data_range)?,
            mae: mae(&a, &b)?,
            sigma_mean: umap.sigma_mean(),
        });
    }
    let records: Vec<(f64, f64)> = reports.iter().map(|r| (r.sigma_mean, r.mae)).collect();
    let curve = binned_calibration(&records, cfg.n_bins.min(records.len()))?;
    let n = sigma_px.len();
    let pooled = UncertaintyMap::from_sigma(
        Array3::from_shape_vec((n, 1, 1), sigma_px).expect("flat"),
        cfg.std_mode,
        samples,
    )?;
    let err = Array3::from_shape_vec((n, 1, 1), err_px).expect("flat");
    let sweep = threshold_sweep(&pooled, &err, cfg.n_thresholds)?;
    let summary = MetricSummary::of(&reports).expect("nonempty");
    Ok(EvalOutcome {
        reports,
        summary,
        curve,
        sweep,
    })
}

/// [`evaluate_pairs`] over the centered pairs of every manifest entry.
pub fn evaluate_set(sampler: &dyn Sampler, dataset: &DatasetManifest, cfg: &EvalConfig) -> Result<EvalOutcome> {
    if dataset.is_empty() {
        return Err(Error::config("evaluation manifest is empty"));
    }
    if sampler.scale() != dataset.scale {
        return Err(Error::config(format!(
            "sampler upscales by {} but the manifest pairs differ by {}",
            sampler.scale(),
            dataset.scale
        )));
    }
    evaluate_pairs(sampler, &dataset.load_pairs()?, cfg)
}
