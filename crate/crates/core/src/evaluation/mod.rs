//! Image-quality metrics and uncertainty calibration analyses.

mod calibration;
mod metrics;
mod report;

pub use calibration::{
    binned_calibration, spearman, threshold_sweep, CalibrationCurve, CalibrationPoint, CurveKind, DEFAULT_BINS,
    DEFAULT_THRESHOLDS,
};
pub use metrics::{luminance, mae, mae_map, psnr, ssim, MetricConfig, SsimConfig};
pub use report::{evaluate_pairs, evaluate_set, EvalConfig, EvalOutcome, MetricReport, MetricSummary};
