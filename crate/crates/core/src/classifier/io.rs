//! Binary weight file.
//!
//! Layout, little-endian throughout:
//! `"MNV2"`, version `u16`, config hash `[u8; 32]`, seed `u64`, epochs `u32`,
//! tensor count `u32`, then per tensor: name length `u16`, UTF-8 name,
//! rank `u32`, dims `u32 * rank`, data `f32 * product(dims)`.

use std::fs;
use std::path::Path;

use super::weights::{Tensor, Weights, WeightsMeta};
use super::NetworkConfig;

const MAGIC: &[u8; 4] = b"MNV2";
const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightsFileError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("file truncated while reading {0}")]
    Truncated(String),
    #[error("config hash mismatch: file was written for a different network")]
    HashMismatch,
    #[error("tensor count {got}, expected {expected}")]
    TensorCount { expected: usize, got: usize },
    #[error("tensor {index}: expected {expected_name} {expected_shape:?}, found {name} {shape:?}")]
    TensorShape { index: usize, expected_name: String, expected_shape: Vec<usize>, name: String, shape: Vec<usize> },
    #[error("{0} trailing bytes after last tensor")]
    Trailing(usize),
    #[error("non-finite value in tensor {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_weights(weights: &Weights<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + weights.parameter_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&weights.config().hash());
    out.extend_from_slice(&weights.meta.seed.to_le_bytes());
    out.extend_from_slice(&weights.meta.epochs.to_le_bytes());
    out.extend_from_slice(&(weights.tensors().len() as u32).to_le_bytes());
    for t in weights.tensors() {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightsFileError> {
        if self.buf.len() - self.pos < n {
            return Err(WeightsFileError::Truncated(what.to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self, what: &str) -> Result<u16, WeightsFileError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32, WeightsFileError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64, WeightsFileError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses a weight file for `config`, rejecting any mismatch in hash or
/// tensor layout.
pub fn read_weights(bytes: &[u8], config: &NetworkConfig) -> Result<Weights<f32>, WeightsFileError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(WeightsFileError::BadMagic);
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(WeightsFileError::Version(version));
    }
    if r.take(32, "config hash")? != config.hash() {
        return Err(WeightsFileError::HashMismatch);
    }
    let seed = r.u64("seed")?;
    let epochs = r.u32("epochs")?;
    let count = r.u32("tensor count")? as usize;
    let layout = config.tensor_layout();
    if count != layout.len() {
        return Err(WeightsFileError::TensorCount { expected: layout.len(), got: count });
    }
    let mut tensors = Vec::with_capacity(count);
    for (index, (expected_name, expected_shape)) in layout.into_iter().enumerate() {
        let what = format!("tensor {index}");
        let name_len = r.u16(&what)? as usize;
        let name = String::from_utf8_lossy(r.take(name_len, &what)?).into_owned();
        let rank = r.u32(&what)? as usize;
        if rank > 8 {
            return Err(WeightsFileError::TensorShape { index, expected_name, expected_shape, name, shape: vec![rank] });
        }
        let shape = (0..rank).map(|_| r.u32(&what).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if name != expected_name || shape != expected_shape {
            return Err(WeightsFileError::TensorShape { index, expected_name, expected_shape, name, shape });
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4, &format!("{name} data"))?;
        let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(WeightsFileError::NonFinite(name));
        }
        tensors.push(Tensor { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(WeightsFileError::Trailing(bytes.len() - r.pos));
    }
    Ok(Weights::from_parts(config.clone(), tensors, WeightsMeta { seed, epochs }))
}

pub fn save_weights(weights: &Weights<f32>, path: impl AsRef<Path>) -> Result<(), WeightsFileError> {
    fs::write(path, write_weights(weights))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<Weights<f32>, WeightsFileError> {
    read_weights(&fs::read(path)?, config)
}
