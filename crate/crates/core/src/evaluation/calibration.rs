use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::UncertaintyMap;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_THRESHOLDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    BinnedImages,
    ThresholdSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub level: f64,
    pub mean_error: f64,
    pub count: usize,
}

/// Uncertainty levels paired with the mean error observed at that level,
/// ordered by strictly increasing level.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub kind: CurveKind,
    pub points: Vec<CalibrationPoint>,
}

impl CalibrationCurve {
    pub fn levels(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.level).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_error).collect()
    }

    /// CSV with columns `level,mean_error,count`; floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["level", "mean_error", "count"]).map_err(err)?;
        for p in &self.points {
            w.write_record([p.level.to_string(), p.mean_error.to_string(), p.count.to_string()])
                .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str, kind: CurveKind) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["level", "mean_error", "count"] {
            return Err(Error::Format(format!("unexpected calibration header {headers:?}")));
        }
        let mut points = Vec::new();
        for rec in r.deserialize() {
            points.push(rec.map_err(|e: csv::Error| Error::Format(e.to_string()))?);
        }
        Ok(Self { kind, points })
    }
}

fn check_finite(values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("calibration inputs must be finite".into()));
    }
    Ok(())
}

/// Groups `(sigma_mean, error)` records into `n_bins` equal-width bins over
/// `[min sigma, max sigma]`; each point is the bin center, the mean error of
/// its members and their count. Empty bins are omitted.
pub fn binned_calibration(records: &[(f64, f64)], n_bins: usize) -> Result<CalibrationCurve> {
    if n_bins == 0 {
        return Err(Error::config("binned calibration needs at least one bin"));
    }
    if records.len() < n_bins {
        return Err(Error::config(format!(
            "{} records cannot fill {n_bins} bins",
            records.len()
        )));
    }
    check_finite(records.iter().flat_map(|(s, e)| [*s, *e]))?;
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let lo = sorted[0].0;
    let hi = sorted[sorted.len() - 1].0;
    if lo == hi {
        let mean = sorted.iter().map(|r| r.1).sum::<f64>() / sorted.len() as f64;
        return Ok(CalibrationCurve {
            kind: CurveKind::BinnedImages,
            points: vec![CalibrationPoint {
                level: lo,
                mean_error: mean,
                count: sorted.len(),
            }],
        });
    }
    let width = (hi - lo) / n_bins as f64;
    let mut sums = vec![(0.0, 0usize); n_bins];
    for (s, e) in &sorted {
        let k = (((s - lo) / width) as usize).min(n_bins - 1);
        sums[k].0 += e;
        sums[k].1 += 1;
    }
    let points = sums
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(k, (total, n))| CalibrationPoint {
            level: lo + (k as f64 + 0.5) * width,
            mean_error: total / *n as f64,
            count: *n,
        })
        .collect();
    Ok(CalibrationCurve {
        kind: CurveKind::BinnedImages,
        points,
    })
}

/// For `n_thresholds` levels linearly spaced over `[min sigma, max sigma]`,
/// the mean of `err` over the pixels whose sigma is at least the level.
/// Coinciding levels are reported once.
pub fn threshold_sweep(umap: &UncertaintyMap, err: &Array3<f64>, n_thresholds: usize) -> Result<CalibrationCurve> {
    if n_thresholds < 2 {
        return Err(Error::config("a threshold sweep needs at least two thresholds"));
    }
    if umap.dims() != err.dim() {
        return Err(Error::Shape(format!(
            "uncertainty map {:?} vs error map {:?}",
            umap.dims(),
            err.dim()
        )));
    }
    check_finite(err.iter().copied())?;
    let mut pixels: Vec<(f64, f64)> = umap.sigma().iter().copied().zip(err.iter().copied()).collect();
    pixels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // suffix[i] = sum of errors of pixels[i..], accumulated from the top
    let mut suffix = vec![0.0; pixels.len() + 1];
    for i in (0..pixels.len()).rev() {
        suffix[i] = suffix[i + 1] + pixels[i].1;
    }
    let lo = pixels[0].0;
    let hi = pixels[pixels.len() - 1].0;
    let step = (hi - lo) / (n_thresholds - 1) as f64;
    let mut points: Vec<CalibrationPoint> = Vec::new();
    for t in 0..n_thresholds {
        let level = if t == n_thresholds - 1 {
            hi
        } else {
            lo + t as f64 * step
        };
        if points.last().is_some_and(|p| p.level >= level) {
            continue;
        }
        let first = pixels.partition_point(|p| p.0 < level);
        let count = pixels.len() - first;
        if count == 0 {
            continue;
        }
        points.push(CalibrationPoint {
            level,
            mean_error: suffix[first] / count as f64,
            count,
        });
    }
    Ok(CalibrationCurve {
        kind: CurveKind::ThresholdSweep,
        points,
    })
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[order[k]] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either input is constant or the lengths differ or are below two.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
