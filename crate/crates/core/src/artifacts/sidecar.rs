//! Raw uncertainty sidecar: eight little-endian `u32` header words
//! (magic, version, H, W, C, std mode, M, reserved) followed by the
//! per-pixel standard deviation as little-endian `f32` in H, W, C order.

use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::uncertainty::{StdMode, UncertaintyMap};

/// `b"SRSD"` read as a little-endian `u32`.
pub const SIDECAR_MAGIC: u32 = u32::from_le_bytes(*b"SRSD");
pub const SIDECAR_VERSION: u32 = 1;
const HEADER_WORDS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSidecar {
    pub sigma: Array3<f32>,
    pub mode: StdMode,
    pub samples: usize,
}

impl SigmaSidecar {
    pub fn of(map: &UncertaintyMap) -> Self {
        Self {
            sigma: map.sigma().mapv(|v| v as f32),
            mode: map.mode(),
            samples: map.samples(),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.sigma.dim()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (h, w, c) = self.sigma.dim();
        let header = [
            SIDECAR_MAGIC,
            SIDECAR_VERSION,
            h as u32,
            w as u32,
            c as u32,
            self.mode.code(),
            self.samples as u32,
            0,
        ];
        let mut out = Vec::with_capacity(4 * (HEADER_WORDS + self.sigma.len()));
        for word in header {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for v in self.sigma.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Err(Error::Format(format!("sigma sidecar: {m}")));
        if bytes.len() < 4 * HEADER_WORDS {
            return bad(format!("{} bytes is shorter than the header", bytes.len()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        if word(0) != SIDECAR_MAGIC {
            return bad("bad magic".into());
        }
        if word(1) != SIDECAR_VERSION {
            return bad(format!("unsupported version {}", word(1)));
        }
        let (h, w, c) = (word(2) as usize, word(3) as usize, word(4) as usize);
        let Some(mode) = StdMode::from_code(word(5)) else {
            return bad(format!("unknown std mode code {}", word(5)));
        };
        let body = &bytes[4 * HEADER_WORDS..];
        if body.len() != 4 * h * w * c {
            return bad(format!("{} payload bytes for a {h}x{w}x{c} map", body.len()));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        Ok(Self {
            sigma: Array3::from_shape_vec((h, w, c), values).expect("length checked"),
            mode,
            samples: word(6) as usize,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Channel-mean standard deviation per pixel, row major.
    pub fn channel_mean(&self) -> Vec<f64> {
        let (h, w, c) = self.sigma.dim();
        let mut out = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let s: f64 = (0..c).map(|k| f64::from(self.sigma[[y, x, k]])).sum();
                out.push(s / c as f64);
            }
        }
        out
    }
}
