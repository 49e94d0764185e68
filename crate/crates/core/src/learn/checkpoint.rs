//! Flat binary model checkpoints.
//!
//! Layout (all integers little-endian):
//! `b"FLCC"`, version `u32`, parameter count `u64`, architecture string
//! length `u32`, architecture string bytes (UTF-8), then one `f64` per
//! parameter.

use std::fs;
use std::path::Path;

use super::{ModelArch, ModelParams};
use crate::error::{FlccError, Result};

pub const MAGIC: &[u8; 4] = b"FLCC";
pub const VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let arch = params.arch.to_string();
    let mut out = Vec::with_capacity(20 + arch.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    out.extend_from_slice(arch.as_bytes());
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let err = |field: &'static str, reason: String| FlccError::Format {
        path: path.to_path_buf(),
        field,
        reason,
    };
    let take = |at: usize, n: usize, field: &'static str| {
        bytes
            .get(at..at + n)
            .ok_or_else(|| err(field, format!("truncated at byte {at}")))
    };
    if take(0, 4, "magic")? != MAGIC {
        return Err(err("magic", "expected FLCC".into()));
    }
    let version = u32::from_le_bytes(take(4, 4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(err("version", format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(take(8, 8, "param_count")?.try_into().expect("8 bytes")) as usize;
    let arch_len = u32::from_le_bytes(take(16, 4, "arch_len")?.try_into().expect("4 bytes")) as usize;
    let arch_str = std::str::from_utf8(take(20, arch_len, "arch")?)
        .map_err(|e| err("arch", e.to_string()))?;
    let arch: ModelArch = arch_str.parse().map_err(|e: FlccError| err("arch", e.to_string()))?;
    if arch.param_count() != count {
        return Err(err(
            "param_count",
            format!("{count} does not match architecture ({})", arch.param_count()),
        ));
    }
    let body = &bytes[20 + arch_len..];
    if body.len() != 8 * count {
        return Err(err(
            "params",
            format!("expected {} bytes, found {}", 8 * count, body.len()),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ModelParams::from_values(&arch, values)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| FlccError::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| FlccError::io(path, e))?;
    decode(&bytes, path)
}
