//! Two-file volume format: a JSON header plus a raw little-endian sample blob.
//!
//! ```json
//! {
//!   "dims": [nx, ny, nz],
//!   "spacing": [sx, sy, sz],
//!   "origin": [ox, oy, oz],
//!   "scalar_type": "f32",
//!   "byte_order": "little",
//!   "data_file": "skull.raw"
//! }
//! ```
//!
//! `data_file` is resolved relative to the header. Samples are x fastest,
//! then y, then z; spacing and origin are millimeters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScalarVolume, VolumeError};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    U8,
    I16,
    U16,
    I32,
    F32,
    F64,
}

impl ScalarType {
    pub fn size(self) -> usize {
        match self {
            ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::U8 => out.push(v.round().clamp(0.0, u8::MAX as f64) as u8),
            ScalarType::I16 => out.extend_from_slice(&(v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16).to_le_bytes()),
            ScalarType::U16 => out.extend_from_slice(&(v.round().clamp(0.0, u16::MAX as f64) as u16).to_le_bytes()),
            ScalarType::I32 => out.extend_from_slice(&(v.round().clamp(i32::MIN as f64, i32::MAX as f64) as i32).to_le_bytes()),
            ScalarType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            ScalarType::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Little,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: Vec3,
    pub origin: Vec3,
    pub scalar_type: ScalarType,
    pub byte_order: ByteOrder,
    pub data_file: String,
}

pub fn read_volume(header_path: &Path) -> Result<ScalarVolume, VolumeError> {
    let text = fs::read_to_string(header_path)?;
    let header: VolumeHeader = serde_json::from_str(&text).map_err(|e| VolumeError::Header(e.to_string()))?;
    let data_path = header_path.parent().unwrap_or(Path::new(".")).join(&header.data_file);
    let raw = fs::read(&data_path)?;
    let count = header.dims.iter().product::<usize>();
    let size = header.scalar_type.size();
    if raw.len() != count * size {
        return Err(VolumeError::Header(format!(
            "{} holds {} bytes, dims {:?} of {:?} need {}",
            data_path.display(),
            raw.len(),
            header.dims,
            header.scalar_type,
            count * size
        )));
    }
    let samples = raw.chunks_exact(size).map(|b| header.scalar_type.decode(b)).collect();
    ScalarVolume::new(header.dims, header.spacing, header.origin, samples)
}

/// Writes `<header_path>` and a sibling raw file named after it.
pub fn write_volume(header_path: &Path, vol: &ScalarVolume, scalar_type: ScalarType) -> Result<VolumeHeader, VolumeError> {
    let stem = header_path.file_stem().and_then(|s| s.to_str()).unwrap_or("volume");
    let stem = stem.strip_suffix(".vol").unwrap_or(stem);
    let data_file = format!("{stem}.raw");
    let header = VolumeHeader {
        dims: vol.dims(),
        spacing: vol.spacing(),
        origin: vol.origin(),
        scalar_type,
        byte_order: ByteOrder::Little,
        data_file: data_file.clone(),
    };
    let mut raw = Vec::with_capacity(vol.len() * scalar_type.size());
    for &s in vol.samples() {
        scalar_type.encode(s, &mut raw);
    }
    let dir = header_path.parent().unwrap_or(Path::new("."));
    fs::write(dir.join(&data_file), raw)?;
    fs::write(header_path, serde_json::to_string_pretty(&header).map_err(|e| VolumeError::Header(e.to_string()))?)?;
    Ok(header)
}
