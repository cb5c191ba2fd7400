use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Phase;
use crate::error::{Error, Result};

/// Mean losses over one epoch's steps. Terms a phase does not optimize are
/// `None` and written as empty CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub g_total: f64,
    pub g_content: Option<f64>,
    pub g_perceptual: Option<f64>,
    pub g_adv: Option<f64>,
    pub d_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub phase: Phase,
    pub records: Vec<EpochRecord>,
    pub steps: usize,
    /// Named seeds of every random stream the run used.
    pub seeds: Vec<(String, u64)>,
    pub wall_time_s: f64,
}

const HEADER: [&str; 7] = ["epoch", "lr", "g_total", "g_content", "g_perceptual", "g_adv", "d_loss"];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrainReport {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Metrics CSV: `epoch,lr,g_total,g_content,g_perceptual,g_adv,d_loss`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(HEADER).map_err(err)?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.lr.to_string(),
                r.g_total.to_string(),
                opt(r.g_content),
                opt(r.g_perceptual),
                opt(r.g_adv),
                opt(r.d_loss),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn records_from_csv(text: &str) -> Result<Vec<EpochRecord>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::Format(format!("unexpected metrics header {headers:?}")));
        }
        r.deserialize()
            .map(|rec| rec.map_err(|e: csv::Error| Error::Format(e.to_string())))
            .collect()
    }

    /// SHA-256 of the metrics CSV, hex encoded.
    pub fn digest(&self) -> Result<String> {
        let hash = Sha256::digest(self.to_csv()?.as_bytes());
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Human-readable log, one line per epoch. Wall time is left out when
    /// `with_wall_time` is false so that reruns produce identical logs.
    pub fn to_log(&self, with_wall_time: bool) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("phase={} seeds {}\n", self.phase.name(), seeds.join(" ")));
        for r in &self.records {
            let mut line = format!("epoch={} lr={} g_total={}", r.epoch, r.lr, r.g_total);
            for (k, v) in [
                ("g_content", r.g_content),
                ("g_perceptual", r.g_perceptual),
                ("g_adv", r.g_adv),
                ("d_loss", r.d_loss),
            ] {
                if let Some(v) = v {
                    line.push_str(&format!(" {k}={v}"));
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&format!("steps={}", self.steps));
        if with_wall_time {
            out.push_str(&format!(" wall_time_s={:.3}", self.wall_time_s));
        }
        out.push('\n');
        out
    }
}
