//! Shared binary layout for checkpoints and weight bundles:
//! 8-byte magic, `u32` format version, `u64` header length, a JSON header,
//! then every tensor as little-endian `f64` in header order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Param;
use crate::nn::Tensor;

pub(crate) const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 4],
}

impl ParamEntry {
    pub fn of(p: &Param) -> Self {
        let (a, b, c, d) = p.value.dim();
        Self {
            name: p.name.clone(),
            shape: [a, b, c, d],
        }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

pub(crate) fn encode(magic: &[u8; 8], header: &[u8], params: &[Param]) -> Vec<u8> {
    let data_len: usize = params.iter().map(|p| p.value.len() * 8).sum();
    let mut out = Vec::with_capacity(20 + header.len() + data_len);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header);
    for p in params {
        for v in p.value.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Splits a container into its JSON header and tensor payload.
pub(crate) fn decode<'a>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 20 || &bytes[..8] != magic {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let rest = &bytes[20..];
    if header_len > rest.len() {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    Ok(rest.split_at(header_len))
}

pub(crate) fn read_params(entries: &[ParamEntry], data: &[u8]) -> Result<Vec<Param>> {
    let expected: usize = entries.iter().map(|e| e.len() * 8).sum();
    if expected != data.len() {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, header describes {expected}",
            data.len()
        )));
    }
    let mut offset = 0;
    let mut params = Vec::with_capacity(entries.len());
    for e in entries {
        let n = e.len();
        let values: Vec<f64> = data[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += n * 8;
        let [a, b, c, d] = e.shape;
        let value = Tensor::from_shape_vec((a, b, c, d), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
        params.push(Param {
            name: e.name.clone(),
            value,
        });
    }
    Ok(params)
}
