//! Detector weight files.
//!
//! Layout: the 8-byte magic `CAMODET1`, a little-endian `u32` header length,
//! a JSON header naming the architecture and its configuration, then every
//! parameter as a little-endian `f32`.

use std::path::Path;

use aerocamo_core::detector::ARCHITECTURE_TAG;
use aerocamo_core::{ToyDetector, ToyDetectorConfig};
use serde::{Deserialize, Serialize};

use crate::error::{self, AppError, Result};

pub const MAGIC: &[u8; 8] = b"CAMODET1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    pub architecture: String,
    pub config: ToyDetectorConfig,
    pub param_count: usize,
    pub crate_version: String,
}

pub fn encode_detector(det: &ToyDetector) -> Vec<u8> {
    let header = WeightHeader {
        architecture: ARCHITECTURE_TAG.into(),
        config: det.config().clone(),
        param_count: det.params().len(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 4 * det.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in det.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_detector(bytes: &[u8], path: &Path) -> Result<(WeightHeader, ToyDetector)> {
    let bad = |m: &str| AppError::format(path, m);
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("not a detector weight file"));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + n).ok_or_else(|| bad("truncated header"))?;
    let header: WeightHeader = serde_json::from_slice(body).map_err(|e| AppError::format(path, e))?;
    if header.architecture != ARCHITECTURE_TAG {
        return Err(AppError::format(
            path,
            format!("architecture {} is not supported (expected {ARCHITECTURE_TAG})", header.architecture),
        ));
    }
    let raw = &bytes[12 + n..];
    if raw.len() != 4 * header.param_count {
        return Err(bad("parameter block length does not match the header"));
    }
    let params = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let det = ToyDetector::from_params(header.config.clone(), params).map_err(|e| AppError::format(path, e))?;
    Ok((header, det))
}

pub fn save_detector(path: &Path, det: &ToyDetector) -> Result<()> {
    error::write(path, encode_detector(det))
}

pub fn load_detector(path: &Path) -> Result<ToyDetector> {
    Ok(decode_detector(&error::read(path)?, path)?.1)
}
