//! Named tensor bundles, used for feature-extractor weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{decode, encode, read_params, ParamEntry};
use crate::error::{Error, Result};
use crate::models::Param;

const MAGIC: &[u8; 8] = b"SRUNCTEN";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    params: Vec<ParamEntry>,
}

pub fn encode_bundle(params: &[Param]) -> Result<Vec<u8>> {
    let header = Header {
        params: params.iter().map(ParamEntry::of).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    Ok(encode(MAGIC, &json, params))
}

pub fn decode_bundle(bytes: &[u8]) -> Result<Vec<Param>> {
    let (json, data) = decode(MAGIC, bytes)?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
    read_params(&header.params, data)
}

pub fn save_bundle(params: &[Param], path: &Path) -> Result<()> {
    std::fs::write(path, encode_bundle(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<Vec<Param>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&bytes)
}
