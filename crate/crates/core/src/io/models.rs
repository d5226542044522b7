//! Model file: one JSON header line, then the JSON payload.
//!
//! ```text
//! {"format":"presetplan-models","version":1,"length":1234,"crc32":305419896}
//! {...payload...}
//! ```
//!
//! `length` and `crc32` cover the payload bytes, so truncation or corruption
//! is caught before the payload is parsed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::ModelSet;

pub const MODEL_FORMAT: &str = "presetplan-models";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    length: usize,
    crc32: u32,
}

pub fn encode_models(models: &ModelSet) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(models)?;
    let header = Header {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        length: payload.len(),
        crc32: crc32fast::hash(&payload),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_models(bytes: &[u8]) -> Result<ModelSet> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::invalid("model file has no header line"))?;
    let header: Header = serde_json::from_slice(&bytes[..split])?;
    if header.format != MODEL_FORMAT {
        return Err(Error::invalid(format!("not a model file (format {:?})", header.format)));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    let payload = &bytes[split + 1..];
    let computed = crc32fast::hash(payload);
    if payload.len() != header.length || computed != header.crc32 {
        return Err(Error::Checksum {
            stored: header.crc32,
            computed,
        });
    }
    Ok(serde_json::from_slice(payload)?)
}

pub fn save_models(path: impl AsRef<Path>, models: &ModelSet) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_models(models)?).map_err(|e| Error::io(path, e))
}

pub fn load_models(path: impl AsRef<Path>) -> Result<ModelSet> {
    let path = path.as_ref();
    decode_models(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
