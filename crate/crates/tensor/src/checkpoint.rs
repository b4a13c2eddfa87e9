//! Binary checkpoint codec.
//!
//! Layout:
//!
//! ```text
//! magic   b"IGOCKPT\0"         8 bytes
//! version u32 LE               currently 1
//! mlen    u64 LE               manifest length in bytes
//! manifest                     UTF-8 JSON, see `Manifest`
//! blob                         little-endian tensor values, back to back
//! ```
//!
//! Each manifest entry records `{name, shape, dtype, offset}` where `offset`
//! is the byte position of the tensor inside the blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"IGOCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

pub fn encode<T: Scalar>(params: &ParamStore<T>, metadata: serde_json::Value) -> Vec<u8> {
    let mut blob = Vec::with_capacity(params.numel() * T::BYTES);
    let mut tensors = Vec::with_capacity(params.len());
    for (name, t) in params.iter() {
        tensors.push(TensorEntry {
            name: name.to_owned(),
            shape: t.shape().to_vec(),
            dtype: T::DTYPE.to_owned(),
            offset: blob.len() as u64,
        });
        for &v in t.data() {
            v.write_le(&mut blob);
        }
    }
    let manifest = Manifest {
        version: VERSION,
        metadata,
        tensors,
    };
    let mjson = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(20 + mjson.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(mjson.len() as u64).to_le_bytes());
    out.extend_from_slice(&mjson);
    out.extend_from_slice(&blob);
    out
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<(ParamStore<T>, serde_json::Value)> {
    let bad = |m: &str| TensorError::Checkpoint(m.to_owned());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let mlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let mend = 20usize
        .checked_add(mlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[20..mend])
        .map_err(|e| TensorError::Checkpoint(format!("manifest: {e}")))?;
    let blob = &bytes[mend..];
    let mut store = ParamStore::new();
    for entry in manifest.tensors {
        if entry.dtype != T::DTYPE {
            return Err(TensorError::Checkpoint(format!(
                "{}: dtype {} but loading as {}",
                entry.name,
                entry.dtype,
                T::DTYPE
            )));
        }
        let n: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + n * T::BYTES;
        if end > blob.len() {
            return Err(TensorError::Checkpoint(format!(
                "{}: truncated blob",
                entry.name
            )));
        }
        let data = blob[start..end]
            .chunks_exact(T::BYTES)
            .map(T::read_le)
            .collect();
        store.insert(entry.name, Tensor::new(entry.shape, data)?);
    }
    Ok((store, manifest.metadata))
}

pub fn save<T: Scalar>(
    path: impl AsRef<Path>,
    params: &ParamStore<T>,
    metadata: serde_json::Value,
) -> Result<()> {
    fs::write(path, encode(params, metadata))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<(ParamStore<T>, serde_json::Value)> {
    decode(&fs::read(path)?)
}
