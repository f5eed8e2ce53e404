//! `LSTEN01` tensor files: the exchange format for activation and gradient
//! maps produced by the external classifier.
//!
//! Layout (all little-endian, no padding, no footer):
//!
//! ```text
//! b"LSTEN01\0"            8 bytes
//! ndim: u32               4 bytes
//! dims: [u32; ndim]       4 * ndim bytes
//! payload: [f32; prod]    row-major, last index fastest
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 8] = b"LSTEN01\0";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl TensorFile {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::BadRank(shape.len()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                shape,
                expected,
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.shape.len() + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a tensor; `origin` only labels diagnostics.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != TENSOR_MAGIC {
            return Err(Error::BadMagic(origin.to_path_buf()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let ndim = word(8) as usize;
        if ndim == 0 || ndim > 4 {
            return Err(Error::BadRank(ndim));
        }
        let header = 12 + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::LengthMismatch {
                shape: vec![],
                expected: header,
                found: bytes.len(),
            });
        }
        let shape: Vec<usize> = (0..ndim).map(|i| word(12 + 4 * i) as usize).collect();
        let expected: usize = shape.iter().product();
        let payload = &bytes[header..];
        if payload.len() != expected * 4 {
            return Err(Error::LengthMismatch {
                shape,
                expected,
                found: payload.len() / 4,
            });
        }
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { shape, data })
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorFile::from_bytes(&bytes, path)
}

pub fn write_tensor(tensor: &TensorFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}
