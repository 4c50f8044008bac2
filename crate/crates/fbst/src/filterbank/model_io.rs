//! Binary model file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "FBST"            4-byte magic
//! version   u32     format version, currently 1
//! K         u32     filter size
//! N_c       u32     number of channels
//! N_F       u32     regularization DFT grid size
//! W         N_c * K^2 f64, row-major
//! crc32     u32     CRC-32 (IEEE) over everything after the magic
//! ```
//!
//! A sidecar text file (`<model>.meta`) holds `key=value` lines describing
//! how the model was trained; it is informational and not checksummed.

use crate::error::{Error, Result};
use crate::filterbank::FilterBankTransform;
use crate::report::write_atomic;
use ndarray::Array2;
use std::fs;
use std::path::{Path, PathBuf};

pub const MODEL_MAGIC: &[u8; 4] = b"FBST";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Serializes a transform into the model byte format.
pub fn model_bytes(transform: &FilterBankTransform) -> Vec<u8> {
    let k = transform.filter_size() as u32;
    let n_c = transform.num_channels() as u32;
    let n_f = transform.fft_size() as u32;
    let mut payload = Vec::with_capacity(16 + transform.weights().len() * 8);
    payload.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    payload.extend_from_slice(&k.to_le_bytes());
    payload.extend_from_slice(&n_c.to_le_bytes());
    payload.extend_from_slice(&n_f.to_le_bytes());
    for &v in transform.weights() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&payload);
    let mut out = Vec::with_capacity(4 + payload.len() + 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Writes the model file atomically.
pub fn save_model(transform: &FilterBankTransform, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &model_bytes(transform))
}

/// Parses model bytes, verifying magic, version, and checksum.
pub fn parse_model(bytes: &[u8]) -> Result<FilterBankTransform> {
    if bytes.len() < 4 {
        return Err(Error::ModelFormat("file shorter than magic".into()));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    if bytes.len() < 4 + 16 + 4 {
        return Err(Error::ModelFormat("header truncated".into()));
    }
    let payload = &bytes[4..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let word = |i: usize| u32::from_le_bytes(payload[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(0);
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version}"
        )));
    }
    let k = word(1) as usize;
    let n_c = word(2) as usize;
    let n_f = word(3) as usize;
    let expected = 16 + n_c * k * k * 8;
    if payload.len() != expected {
        return Err(Error::ModelFormat(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut w = Array2::<f64>::zeros((n_c, k * k));
    for (idx, chunk) in payload[16..].chunks_exact(8).enumerate() {
        w[[idx / (k * k), idx % (k * k)]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    FilterBankTransform::new(w, k, n_f)
}

/// Loads a model file written by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<FilterBankTransform> {
    parse_model(&fs::read(path)?)
}

/// Conventional sidecar path for a model file.
pub fn sidecar_path(model_path: &Path) -> PathBuf {
    let mut name = model_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".meta");
    model_path.with_file_name(name)
}

/// Writes the `key=value` sidecar next to a model file.
pub fn write_sidecar(model_path: impl AsRef<Path>, entries: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    write_atomic(&sidecar_path(model_path.as_ref()), text.as_bytes())
}
