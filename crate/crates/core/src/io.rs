//! Bit-exact CTK1 volume/sinogram file format, plus a one-way raw importer.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 4    | magic `"CTK1"`                               |
//! | 4      | 4    | u32 version = 1                              |
//! | 8      | 12   | u32 nx, ny, nz                               |
//! | 20     | 12   | f32 sx, sy, sz (mm)                          |
//! | 32     | 1    | u8 dtype                                     |
//! | 33     | ...  | payload, z-major                             |
//!
//! dtype codes: 0 = f32 HU, 1 = i16 HU, 2 = u8 labels, 3 = u16 labels.
//!
//! Sinograms reuse the container with nz = slice count, ny = n_angles,
//! nx = n_bins, dtype 0; sx carries the bin spacing and sy the angle step in
//! radians, so the uniform angle set is recoverable.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sinogram::Sinogram;
use crate::volume::{LabelMap, VolumeF32};

pub const MAGIC: [u8; 4] = *b"CTK1";
pub const VERSION: u32 = 1;
/// Bytes before the payload.
pub const HEADER_LEN: usize = 33;

/// Payload element type codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32Hu = 0,
    I16Hu = 1,
    U8Labels = 2,
    U16Labels = 3,
}

impl Dtype {
    pub fn from_code(code: u8) -> Result<Dtype> {
        match code {
            0 => Ok(Dtype::F32Hu),
            1 => Ok(Dtype::I16Hu),
            2 => Ok(Dtype::U8Labels),
            3 => Ok(Dtype::U16Labels),
            other => Err(Error::BadDtype(other)),
        }
    }

    pub fn elem_size(self) -> usize {
        match self {
            Dtype::F32Hu => 4,
            Dtype::I16Hu => 2,
            Dtype::U8Labels => 1,
            Dtype::U16Labels => 2,
        }
    }
}

/// A parsed CTK1 file: either an HU volume or a label map.
#[derive(Debug, Clone)]
pub enum CtkObject {
    Volume(VolumeF32),
    Labels(LabelMap),
}

fn header_bytes(dims: (usize, usize, usize), spacing: (f64, f64, f64), dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.0 as u32).to_le_bytes());
    out.extend_from_slice(&(dims.1 as u32).to_le_bytes());
    out.extend_from_slice(&(dims.2 as u32).to_le_bytes());
    out.extend_from_slice(&(spacing.0 as f32).to_le_bytes());
    out.extend_from_slice(&(spacing.1 as f32).to_le_bytes());
    out.extend_from_slice(&(spacing.2 as f32).to_le_bytes());
    out.push(dtype as u8);
    out
}

/// Write an HU volume with f32 payload.
pub fn write_volume(v: &VolumeF32, path: &Path) -> Result<()> {
    write_volume_dtype(v, path, Dtype::F32Hu)
}

/// Write an HU volume with an explicit HU dtype (f32 or i16).
pub fn write_volume_dtype(v: &VolumeF32, path: &Path, dtype: Dtype) -> Result<()> {
    v.validate()?;
    let mut bytes = header_bytes(v.dims, v.spacing, dtype);
    match dtype {
        Dtype::F32Hu => {
            bytes.reserve(v.data.len() * 4);
            for &x in &v.data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        Dtype::I16Hu => {
            bytes.reserve(v.data.len() * 2);
            for &x in &v.data {
                bytes.extend_from_slice(&(x.round() as i16).to_le_bytes());
            }
        }
        _ => {
            return Err(Error::InvalidParam(
                "HU volumes require dtype 0 (f32) or 1 (i16)".into(),
            ))
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write a label map with the given label dtype (u8 or u16).
pub fn write_labels(l: &LabelMap, path: &Path, dtype: Dtype) -> Result<()> {
    let mut bytes = header_bytes(l.dims, l.spacing, dtype);
    match dtype {
        Dtype::U8Labels => {
            for &id in &l.data {
                if id > u8::MAX as u16 {
                    return Err(Error::LabelRange {
                        label: id as u32,
                        max: u8::MAX as u32,
                    });
                }
                bytes.push(id as u8);
            }
        }
        Dtype::U16Labels => {
            for &id in &l.data {
                bytes.extend_from_slice(&id.to_le_bytes());
            }
        }
        _ => {
            return Err(Error::InvalidParam(
                "label maps require dtype 2 (u8) or 3 (u16)".into(),
            ))
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parse a CTK1 file into a volume or label map according to its dtype.
pub fn read_volume(path: &Path) -> Result<CtkObject> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ctk(&bytes)
}

/// Parse from an in-memory byte image (exposed for tests).
pub fn parse_ctk(bytes: &[u8]) -> Result<CtkObject> {
    if bytes.len() < 4 {
        let mut found = [0u8; 4];
        found[..bytes.len()].copy_from_slice(bytes);
        return Err(Error::BadMagic { found });
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::BadMagic {
            found: [bytes[0], bytes[1], bytes[2], bytes[3]],
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let dims = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let spacing = (f32_at(20) as f64, f32_at(24) as f64, f32_at(28) as f64);
    let dtype = Dtype::from_code(bytes[32])?;

    let n = dims
        .0
        .checked_mul(dims.1)
        .and_then(|p| p.checked_mul(dims.2))
        .ok_or_else(|| Error::InvalidParam(format!("dims overflow: {dims:?}")))?;
    let expected = HEADER_LEN as u64 + (n * dtype.elem_size()) as u64;
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + n * dtype.elem_size()];

    match dtype {
        Dtype::F32Hu => {
            let mut data = Vec::with_capacity(n);
            for (i, chunk) in payload.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        offset: (HEADER_LEN + i * 4) as u64,
                    });
                }
                data.push(v);
            }
            Ok(CtkObject::Volume(VolumeF32::new(dims, spacing, data)?))
        }
        Dtype::I16Hu => {
            let data = payload
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f32)
                .collect();
            Ok(CtkObject::Volume(VolumeF32::new(dims, spacing, data)?))
        }
        Dtype::U8Labels => {
            let data = payload.iter().map(|&b| b as u16).collect();
            Ok(CtkObject::Labels(LabelMap::new(dims, spacing, data)?))
        }
        Dtype::U16Labels => {
            let data = payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(CtkObject::Labels(LabelMap::new(dims, spacing, data)?))
        }
    }
}

/// Read a file that must contain an HU volume.
pub fn read_volume_hu(path: &Path) -> Result<VolumeF32> {
    match read_volume(path)? {
        CtkObject::Volume(v) => Ok(v),
        CtkObject::Labels(_) => Err(Error::InvalidParam(format!(
            "{} holds a label map, expected an HU volume",
            path.display()
        ))),
    }
}

/// Read a file that must contain a label map.
pub fn read_labels(path: &Path) -> Result<LabelMap> {
    match read_volume(path)? {
        CtkObject::Labels(l) => Ok(l),
        CtkObject::Volume(_) => Err(Error::InvalidParam(format!(
            "{} holds an HU volume, expected a label map",
            path.display()
        ))),
    }
}

/// Store a sinogram stack as CTK1 (nz = slices, ny = angles, nx = bins).
pub fn write_sinograms(slices: &[Sinogram], path: &Path) -> Result<()> {
    let first = slices
        .first()
        .ok_or_else(|| Error::InvalidParam("no sinogram slices to write".into()))?;
    let n_angles = first.n_angles();
    let angle_step = std::f64::consts::PI / n_angles as f64;
    let mut bytes = header_bytes(
        (first.n_bins, n_angles, slices.len()),
        (first.bin_spacing, angle_step, 1.0),
        Dtype::F32Hu,
    );
    for s in slices {
        if s.n_angles() != n_angles || s.n_bins != first.n_bins {
            return Err(Error::GeometryMismatch(
                "sinogram slices disagree on grid".into(),
            ));
        }
        for &v in &s.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read a sinogram stack written by [`write_sinograms`]. Angles are
/// reconstructed as the uniform grid `a * sy`.
pub fn read_sinograms(path: &Path) -> Result<Vec<Sinogram>> {
    let v = read_volume_hu(path)?;
    let (n_bins, n_angles, n_slices) = v.dims;
    let angle_step = v.spacing.1;
    let angles: Vec<f64> = (0..n_angles).map(|a| a as f64 * angle_step).collect();
    let mut out = Vec::with_capacity(n_slices);
    for z in 0..n_slices {
        let data = v.slice(z).iter().map(|&x| x as f64).collect();
        out.push(Sinogram::new(
            angles.clone(),
            n_bins,
            v.spacing.0,
            data,
        )?);
    }
    Ok(out)
}

/// Sidecar metadata for the raw importer.
#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMeta {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

/// One-way import: 16-bit signed little-endian HU payload plus a JSON
/// sidecar with dims and spacing. HU values are clamped on ingest.
pub fn import_raw_i16(raw_path: &Path, meta: &RawMeta) -> Result<VolumeF32> {
    let bytes = fs::read(raw_path).map_err(|e| Error::io(raw_path, e))?;
    let n = meta.dims[0] * meta.dims[1] * meta.dims[2];
    if bytes.len() < n * 2 {
        return Err(Error::Truncated {
            expected: (n * 2) as u64,
            actual: bytes.len() as u64,
        });
    }
    let data = bytes[..n * 2]
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f32)
        .collect();
    VolumeF32::new(
        (meta.dims[0], meta.dims[1], meta.dims[2]),
        (meta.spacing[0], meta.spacing[1], meta.spacing[2]),
        data,
    )
}
