//! Binary checkpoint: one JSON header line followed by the raw parameters as
//! little-endian `f64`, in header order.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FORMAT: &str = "intent-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header<M> {
    pub format: String,
    pub v: u32,
    pub meta: M,
    pub tensors: Vec<TensorInfo>,
}

pub fn encode<M: Serialize>(meta: &M, store: &ParamStore) -> Result<Vec<u8>> {
    let header = Header {
        format: FORMAT.to_string(),
        v: VERSION,
        meta,
        tensors: store
            .iter()
            .map(|(name, t)| TensorInfo {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(store.size() * 8);
    for (_, t) in store.iter() {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode<M: DeserializeOwned>(bytes: &[u8]) -> Result<(M, ParamStore)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: Header<M> = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", header.format)));
    }
    if header.v != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header.v)));
    }
    let payload = &bytes[nl + 1..];
    let expected: usize = header
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>() * 8)
        .sum();
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, header describes {expected}",
            payload.len()
        )));
    }
    let mut store = ParamStore::new();
    let mut chunks = payload.chunks_exact(8);
    for info in header.tensors {
        let n: usize = info.shape.iter().product();
        let data = chunks
            .by_ref()
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.insert(info.name, Tensor::new(info.shape, data)?)?;
    }
    Ok((header.meta, store))
}

/// Writes through a sibling temporary file so readers never observe a torn
/// checkpoint.
pub fn save<M: Serialize>(path: &Path, meta: &M, store: &ParamStore) -> Result<()> {
    let bytes = encode(meta, store)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load<M: DeserializeOwned>(path: &Path) -> Result<(M, ParamStore)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
