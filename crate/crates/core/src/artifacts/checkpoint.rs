//! Model checkpoints.
//!
//! The JSON header carries the architecture, the training provenance and
//! the dropout placement; serialization is canonical, so `save -> load ->
//! save` reproduces the same bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Method;
use super::container::{decode, encode, read_params, ParamEntry};
use crate::error::{Error, Result};
use crate::models::{Architecture, Model, Param};
use crate::training::{Phase, TrainReport};
use crate::uncertainty::{EnsembleSampler, IdentitySampler, McdSampler, Sampler, SingleSampler};

const MAGIC: &[u8; 8] = b"SRUNCKPT";

/// Where the weights came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingProvenance {
    /// Last phase that ran; `None` for an untrained model.
    pub phase: Option<Phase>,
    /// Number of completed epochs of that phase.
    pub epoch: usize,
    pub seed: u64,
    /// SHA-256 of the phase's metrics CSV.
    pub loss_digest: Option<String>,
}

impl TrainingProvenance {
    pub fn untrained(seed: u64) -> Self {
        Self {
            phase: None,
            epoch: 0,
            seed,
            loss_digest: None,
        }
    }

    pub fn from_report(report: &TrainReport, seed: u64) -> Result<Self> {
        Ok(Self {
            phase: Some(report.phase),
            epoch: report.records.len(),
            seed,
            loss_digest: Some(report.digest()?),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: Architecture,
    provenance: TrainingProvenance,
    dropout_positions: Vec<usize>,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub provenance: TrainingProvenance,
    pub dropout_positions: Vec<usize>,
    pub params: Vec<Param>,
}

impl Checkpoint {
    pub fn of(model: &Model, provenance: TrainingProvenance) -> Self {
        Self {
            architecture: model.arch().clone(),
            provenance,
            dropout_positions: model.dropout_positions(),
            params: model.params().to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            architecture: self.architecture.clone(),
            provenance: self.provenance.clone(),
            dropout_positions: self.dropout_positions.clone(),
            params: self.params.iter().map(ParamEntry::of).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        Ok(encode(MAGIC, &json, &self.params))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (json, data) = decode(MAGIC, bytes)?;
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let params = read_params(&header.params, data)?;
        Ok(Self {
            architecture: header.architecture,
            provenance: header.provenance,
            dropout_positions: header.dropout_positions,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn digest(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.to_bytes()?)))
    }

    /// Rebuilds the model, checking parameter names and shapes and the
    /// recorded dropout placement against the architecture.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::build(self.architecture.clone(), 0)?;
        if model.dropout_positions() != self.dropout_positions {
            return Err(Error::Checkpoint(format!(
                "dropout positions {:?} do not match the architecture's {:?}",
                self.dropout_positions,
                model.dropout_positions()
            )));
        }
        model.load_params(self.params.clone())?;
        Ok(model)
    }

    /// Like [`Checkpoint::to_model`], but fails unless the stored
    /// architecture equals `expected`.
    pub fn to_model_as(&self, expected: &Architecture) -> Result<Model> {
        if &self.architecture != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint architecture {:?} does not match the configured {:?}",
                self.architecture, expected
            )));
        }
        self.to_model()
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Settings for [`sampler_from_checkpoints`].
#[derive(Debug, Clone, Copy)]
pub struct SamplerSpec<'a> {
    pub method: Method,
    /// MC dropout forwards.
    pub samples: usize,
    /// Dropout-mask seed for MC dropout.
    pub seed: u64,
    /// Forces forwards to run one after another.
    pub sequential: bool,
    /// When given, every checkpoint must have exactly this architecture.
    pub expected: Option<&'a Architecture>,
}

/// Builds the sampler for `spec.method`: `single` and `mcd` take one
/// generator checkpoint, `ensemble` two or more of identical architecture,
/// `identity` none.
pub fn sampler_from_checkpoints(checkpoints: &[Checkpoint], spec: SamplerSpec<'_>) -> Result<Box<dyn Sampler>> {
    let models = checkpoints
        .iter()
        .map(|c| {
            if !c.architecture.is_generator() {
                return Err(Error::Config("checkpoint does not hold a generator".into()));
            }
            match spec.expected {
                Some(arch) => c.to_model_as(arch),
                None => c.to_model(),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let one = |name: &str| -> Result<Model> {
        if models.len() != 1 {
            return Err(Error::Config(format!(
                "method {name} takes exactly one checkpoint, got {}",
                models.len()
            )));
        }
        Ok(models[0].clone())
    };
    Ok(match spec.method {
        Method::Identity => {
            if !models.is_empty() {
                return Err(Error::Config("method identity takes no checkpoint".into()));
            }
            Box::new(IdentitySampler)
        }
        Method::Single => Box::new(SingleSampler { model: one("single")? }),
        Method::Mcd => {
            let model = one("mcd")?;
            if model.dropout_positions().is_empty() || model.dropout_p() == 0.0 {
                return Err(Error::Config(
                    "method mcd needs a generator with active dropout layers".into(),
                ));
            }
            if spec.samples == 0 {
                return Err(Error::Config("method mcd needs at least one sample".into()));
            }
            Box::new(McdSampler {
                model,
                samples: spec.samples,
                seed: spec.seed,
                sequential: spec.sequential,
            })
        }
        Method::Ensemble => {
            if models.len() < 2 {
                return Err(Error::Config(format!(
                    "method ensemble needs at least two checkpoints, got {}",
                    models.len()
                )));
            }
            if checkpoints
                .iter()
                .any(|c| c.architecture != checkpoints[0].architecture)
            {
                return Err(Error::Config("ensemble members differ in architecture".into()));
            }
            Box::new(EnsembleSampler {
                seeds: checkpoints.iter().map(|c| c.provenance.seed).collect(),
                members: models,
                sequential: spec.sequential,
            })
        }
    })
}
