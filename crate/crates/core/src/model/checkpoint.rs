//! Checkpoint layout, version 1:
//!
//! ```text
//! bytes 0..8     magic  b"DETMASK\0"
//! bytes 8..16    u64 little-endian: header length H
//! bytes 16..16+H UTF-8 JSON header
//! bytes 16+H..   tensor data, f64 little-endian, row-major
//! ```
//!
//! The header is `{"format": "detmask-checkpoint", "version": 1, "config": {..},
//! "vocab": [..], "dtype": "f64-le", "tensors": [{"name", "shape", "offset"}]}`
//! where `offset` is in bytes from the start of the data section.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::{Params, GROUP_NAMES};
use super::{ModelConfig, ModelError, ModelState};
use crate::masking::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DETMASK\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "detmask-checkpoint";
const DTYPE: &str = "f64-le";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: u64,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    state: &ModelState,
    vocab: &Vocabulary,
) -> Result<(), ModelError> {
    if vocab.len() != state.config.vocab_size {
        return Err(bad(format!(
            "vocabulary has {} tokens, config expects {}",
            vocab.len(),
            state.config.vocab_size
        )));
    }
    let mut offset = 0u64;
    let tensors = state
        .params
        .groups()
        .iter()
        .map(|(name, t)| {
            let e = TensorEntry {
                name: name.to_string(),
                shape: [t.nrows(), t.ncols()],
                offset,
            };
            offset += (t.len() * 8) as u64;
            e
        })
        .collect();
    let header = Header {
        format: FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: state.config.clone(),
        vocab: vocab.tokens().to_vec(),
        dtype: DTYPE.into(),
        tensors,
    };
    let json = serde_json::to_vec(&header).map_err(std::io::Error::from)?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, t) in state.params.groups() {
        for x in t.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ModelState, Vocabulary), ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    let mut json = vec![0u8; usize::try_from(len).map_err(|_| bad("header too large"))?];
    r.read_exact(&mut json)?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| bad(format!("header: {e}")))?;
    if header.format != FORMAT || header.version != CHECKPOINT_VERSION || header.dtype != DTYPE {
        return Err(bad(format!(
            "unsupported {} version {} dtype {}",
            header.format, header.version, header.dtype
        )));
    }
    header.config.validate()?;
    let vocab = Vocabulary::from_tokens(header.vocab).map_err(|e| bad(e.to_string()))?;
    if vocab.len() != header.config.vocab_size {
        return Err(bad("vocabulary size does not match config"));
    }
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;

    let mut params = Params::zeros(&header.config);
    if header.tensors.len() != GROUP_NAMES.len() {
        return Err(bad("wrong tensor count"));
    }
    for (name, t) in params.groups_mut() {
        let e = header
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| bad(format!("missing tensor {name}")))?;
        if e.shape != [t.nrows(), t.ncols()] {
            return Err(bad(format!("tensor {name} has shape {:?}", e.shape)));
        }
        let start = usize::try_from(e.offset).map_err(|_| bad("offset too large"))?;
        let end = start + t.len() * 8;
        let bytes = data
            .get(start..end)
            .ok_or_else(|| bad(format!("tensor {name} out of bounds")))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        *t = Array2::from_shape_vec((e.shape[0], e.shape[1]), values)
            .map_err(|e| bad(e.to_string()))?;
    }
    if !params.all_finite() {
        return Err(bad("non-finite weights"));
    }
    Ok((
        ModelState {
            config: header.config,
            params,
        },
        vocab,
    ))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    state: &ModelState,
    vocab: &Vocabulary,
) -> Result<(), ModelError> {
    write_checkpoint(BufWriter::new(File::create(path)?), state, vocab)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelState, Vocabulary), ModelError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
