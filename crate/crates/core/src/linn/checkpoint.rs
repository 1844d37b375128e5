//! JSON checkpoints: model layout, parameter values and optimizer state.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::model::{LinnModel, ModelSpec};
use crate::corpus::tokens::vocab_hash;
use crate::nn::Tensor;

pub const FORMAT: &str = "linkoracle-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint model layout does not match its recorded hash or this build")]
    SpecMismatch,
    #[error("checkpoint vocabulary {found} differs from this build's {expected}")]
    VocabularyMismatch { expected: String, found: String },
    #[error("parameter `{0}` missing, unexpected or misshapen")]
    ParamMismatch(String),
}

impl CheckpointError {
    /// Whether the file was readable but made for a different model or vocabulary.
    pub fn is_mismatch(&self) -> bool {
        matches!(
            self,
            Self::SpecMismatch | Self::VocabularyMismatch { .. } | Self::ParamMismatch(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    /// Base64 of little-endian f64 values.
    value: String,
    accum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    spec: ModelSpec,
    spec_hash: String,
    vocab_hash: String,
    step: u64,
    params: Vec<StoredTensor>,
}

/// Hex SHA-256 of the canonical JSON of `spec`.
pub fn spec_hash(spec: &ModelSpec) -> String {
    let json = serde_json::to_vec(spec).expect("specs always serialize");
    Sha256::digest(json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn encode(data: &[f64]) -> String {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(name: &str, text: &str, shape: &[usize]) -> Result<Tensor, CheckpointError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CheckpointError::Format(format!("{name}: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(CheckpointError::Format(format!("{name}: truncated tensor")));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight")))
        .collect();
    Tensor::from_vec(shape, data).map_err(|_| CheckpointError::ParamMismatch(name.to_owned()))
}

pub fn to_json(model: &LinnModel) -> String {
    let store = model.store();
    let ckpt = Checkpoint {
        format: FORMAT.to_owned(),
        version: VERSION,
        spec: model.spec().clone(),
        spec_hash: spec_hash(model.spec()),
        vocab_hash: vocab_hash(),
        step: store.step(),
        params: store
            .params()
            .iter()
            .map(|p| StoredTensor {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                value: encode(p.value.data()),
                accum: encode(p.accum.data()),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&ckpt).expect("checkpoints always serialize")
}

pub fn from_json(text: &str) -> Result<LinnModel, CheckpointError> {
    let ckpt: Checkpoint =
        serde_json::from_str(text).map_err(|e| CheckpointError::Format(e.to_string()))?;
    if ckpt.format != FORMAT || ckpt.version != VERSION {
        return Err(CheckpointError::Format(format!(
            "expected {FORMAT} version {VERSION}, found {} version {}",
            ckpt.format, ckpt.version
        )));
    }
    let expected = vocab_hash();
    if ckpt.vocab_hash != expected {
        return Err(CheckpointError::VocabularyMismatch {
            expected,
            found: ckpt.vocab_hash,
        });
    }
    if spec_hash(&ckpt.spec) != ckpt.spec_hash {
        return Err(CheckpointError::SpecMismatch);
    }
    let rebuilt = ModelSpec::new(ckpt.spec.instantiation, ckpt.spec.hyper.clone())
        .map_err(|_| CheckpointError::SpecMismatch)?;
    if rebuilt != ckpt.spec {
        return Err(CheckpointError::SpecMismatch);
    }
    let mut model = LinnModel::build(rebuilt);
    if ckpt.params.len() != model.store().len() {
        return Err(CheckpointError::ParamMismatch(format!(
            "{} stored, {} expected",
            ckpt.params.len(),
            model.store().len()
        )));
    }
    let store = model.store_mut();
    for p in &ckpt.params {
        let value = decode(&p.name, &p.value, &p.shape)?;
        let accum = decode(&p.name, &p.accum, &p.shape)?;
        store
            .restore(&p.name, value, accum)
            .map_err(|_| CheckpointError::ParamMismatch(p.name.clone()))?;
    }
    store.set_step(ckpt.step);
    Ok(model)
}

pub fn save(model: &LinnModel, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_json(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<LinnModel, CheckpointError> {
    from_json(&std::fs::read_to_string(path)?)
}
