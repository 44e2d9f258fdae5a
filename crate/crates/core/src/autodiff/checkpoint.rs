//! Named-tensor archive.
//!
//! Layout: the magic bytes `CLSC1`, a little-endian `u32` manifest length,
//! a UTF-8 JSON manifest, then the raw little-endian tensor values back to
//! back in manifest order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::nn::ParamStore;
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 5] = b"CLSC1";

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
    bytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    tensors: Vec<Entry>,
}

/// Parameters plus free-form string metadata (architecture, provenance).
#[derive(Clone, Debug, Default)]
pub struct Checkpoint<T> {
    pub params: ParamStore<T>,
    pub meta: BTreeMap<String, String>,
}

impl<T: Real> Checkpoint<T> {
    pub fn new(params: ParamStore<T>) -> Self {
        Self {
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut blob = Vec::new();
        let mut tensors = Vec::new();
        for (name, t) in self.params.iter() {
            let offset = blob.len();
            for &v in t.data() {
                v.write_le(&mut blob);
            }
            tensors.push(Entry {
                name: name.to_string(),
                dtype: T::DTYPE.to_string(),
                shape: t.shape().to_vec(),
                offset,
                bytes: blob.len() - offset,
            });
        }
        let manifest = Manifest {
            version: 1,
            meta: self.meta.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("missing CLSC1 magic"));
        }
        let mut len = [0u8; 4];
        len.copy_from_slice(&bytes[5..9]);
        let len = u32::from_le_bytes(len) as usize;
        let json = bytes.get(9..9 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let blob = &bytes[9 + len..];
        let mut params = ParamStore::new();
        for e in manifest.tensors {
            let width = match e.dtype.as_str() {
                "f32" => 4,
                "f64" => 8,
                other => return Err(Error::Checkpoint(format!("unknown dtype {other}"))),
            };
            let count: usize = e.shape.iter().product();
            if count * width != e.bytes {
                return Err(Error::Checkpoint(format!("size mismatch for `{}`", e.name)));
            }
            let raw = blob
                .get(e.offset..e.offset + e.bytes)
                .ok_or_else(|| Error::Checkpoint(format!("truncated data for `{}`", e.name)))?;
            let data = raw
                .chunks_exact(width)
                .map(|c| match width {
                    4 => T::of(f32::read_le(c) as f64),
                    _ => T::of(f64::read_le(c)),
                })
                .collect();
            params.add(e.name, Tensor::new(e.shape, data)?)?;
        }
        Ok(Self {
            params,
            meta: manifest.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
