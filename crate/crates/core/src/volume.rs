//! Voxel containers: HU volumes, attenuation volumes, and label maps.
//!
//! All payloads are stored flat in z-major order: the voxel at `(x, y, z)`
//! lives at index `z*ny*nx + y*nx + x`. Processing is per-axial-slice, so
//! most algorithms borrow one z-plane at a time via [`VolumeF32::slice`].

use crate::error::{Error, Result};

/// Lower edge of the representable HU range (12-bit CT convention).
pub const HU_MIN: f32 = -1024.0;
/// Upper edge of the representable HU range.
pub const HU_MAX: f32 = 3071.0;
/// Width of the HU range; the `data_range` used by SSIM/PSNR.
pub const HU_RANGE: f64 = (HU_MAX - HU_MIN) as f64;

/// Clamp a single value into the representable HU range.
#[inline]
pub fn clamp_hu(v: f32) -> f32 {
    v.clamp(HU_MIN, HU_MAX)
}

/// A 2D slice or 3D stack of voxel values in Hounsfield units.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeF32 {
    /// Voxel counts `(nx, ny, nz)`.
    pub dims: (usize, usize, usize),
    /// Voxel size in mm `(sx, sy, sz)`.
    pub spacing: (f64, f64, f64),
    /// `nx*ny*nz` HU values, z-major.
    pub data: Vec<f32>,
}

impl VolumeF32 {
    /// Build a volume, clamping every value into `[HU_MIN, HU_MAX]` on ingest.
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        mut data: Vec<f32>,
    ) -> Result<Self> {
        validate_dims(dims, spacing, data.len())?;
        for v in &mut data {
            if !v.is_finite() {
                return Err(Error::InvalidParam("non-finite HU value".into()));
            }
            *v = clamp_hu(*v);
        }
        Ok(VolumeF32 {
            dims,
            spacing,
            data,
        })
    }

    /// Uniform volume filled with `hu`.
    pub fn filled(dims: (usize, usize, usize), spacing: (f64, f64, f64), hu: f32) -> Self {
        let (nx, ny, nz) = dims;
        VolumeF32 {
            dims,
            spacing,
            data: vec![clamp_hu(hu); nx * ny * nz],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Borrow the z-th axial slice (`ny*nx` values).
    pub fn slice(&self, z: usize) -> &[f32] {
        let plane = self.dims.0 * self.dims.1;
        &self.data[z * plane..(z + 1) * plane]
    }

    /// Mutably borrow the z-th axial slice.
    pub fn slice_mut(&mut self, z: usize) -> &mut [f32] {
        let plane = self.dims.0 * self.dims.1;
        &mut self.data[z * plane..(z + 1) * plane]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        let (nx, ny, _) = self.dims;
        self.data[z * ny * nx + y * nx + x]
    }

    /// Clamp every voxel into the HU range in place (final-output guard).
    pub fn clamp_in_place(&mut self) {
        for v in &mut self.data {
            *v = clamp_hu(*v);
        }
    }

    /// Check the type invariants: payload length and finiteness.
    pub fn validate(&self) -> Result<()> {
        validate_dims(self.dims, self.spacing, self.data.len())?;
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite HU value at voxel index {i}"
            )));
        }
        Ok(())
    }
}

/// An attenuation volume in mm^-1, the line-integral domain of the projector.
///
/// Kept in f64 so that `mu_to_hu(hu_to_mu(x))` reproduces `x` exactly after
/// the final cast back to f32.
#[derive(Debug, Clone, PartialEq)]
pub struct MuVolume {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    /// `nx*ny*nz` attenuation values in mm^-1, z-major, all >= 0.
    pub data: Vec<f64>,
}

impl MuVolume {
    pub fn slice(&self, z: usize) -> &[f64] {
        let plane = self.dims.0 * self.dims.1;
        &self.data[z * plane..(z + 1) * plane]
    }
}

/// Scalar HU -> attenuation conversion shared by every call site, so
/// composed paths stay bit-identical to the volume-level operation.
#[inline]
pub fn hu_to_mu_scalar(hu: f32, mu_water: f64) -> f64 {
    (mu_water * (1.0 + hu as f64 / 1000.0)).max(0.0)
}

/// Convert HU to linear attenuation: `mu = mu_water * (1 + HU/1000)`,
/// clamped at zero (values below -1000 HU carry no attenuation).
pub fn hu_to_mu(v: &VolumeF32, mu_water: f64) -> Result<MuVolume> {
    if mu_water <= 0.0 {
        return Err(Error::InvalidParam("mu_water must be > 0".into()));
    }
    let data = v
        .data
        .iter()
        .map(|&hu| hu_to_mu_scalar(hu, mu_water))
        .collect();
    Ok(MuVolume {
        dims: v.dims,
        spacing: v.spacing,
        data,
    })
}

/// Inverse of [`hu_to_mu`] on the non-clamped range; output clamped to the HU
/// range.
pub fn mu_to_hu(img: &MuVolume, mu_water: f64) -> Result<VolumeF32> {
    if mu_water <= 0.0 {
        return Err(Error::InvalidParam("mu_water must be > 0".into()));
    }
    let data = img
        .data
        .iter()
        .map(|&mu| clamp_hu((1000.0 * (mu / mu_water - 1.0)) as f32))
        .collect();
    Ok(VolumeF32 {
        dims: img.dims,
        spacing: img.spacing,
        data,
    })
}

/// Integer region map aligned voxel-for-voxel with a [`VolumeF32`].
///
/// ID 0 is background; structures use small positive IDs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    /// `nx*ny*nz` region IDs, z-major.
    pub data: Vec<u16>,
}

impl LabelMap {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        data: Vec<u16>,
    ) -> Result<Self> {
        validate_dims(dims, spacing, data.len())?;
        Ok(LabelMap {
            dims,
            spacing,
            data,
        })
    }

    pub fn zeros(dims: (usize, usize, usize), spacing: (f64, f64, f64)) -> Self {
        let (nx, ny, nz) = dims;
        LabelMap {
            dims,
            spacing,
            data: vec![0; nx * ny * nz],
        }
    }

    pub fn slice(&self, z: usize) -> &[u16] {
        let plane = self.dims.0 * self.dims.1;
        &self.data[z * plane..(z + 1) * plane]
    }

    /// Sorted list of distinct non-background IDs present in the map.
    pub fn ids(&self) -> Vec<u16> {
        let mut seen = [false; u16::MAX as usize + 1];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        (1..=u16::MAX).filter(|&id| seen[id as usize]).collect()
    }

    /// Error unless `self` and `v` cover the same grid.
    pub fn check_aligned(&self, dims: (usize, usize, usize)) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimsMismatch {
                a: self.dims,
                b: dims,
            });
        }
        Ok(())
    }
}

fn validate_dims(
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    len: usize,
) -> Result<()> {
    let (nx, ny, nz) = dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidParam(format!("zero dimension in {dims:?}")));
    }
    if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "non-positive spacing {spacing:?}"
        )));
    }
    if len != nx * ny * nz {
        return Err(Error::InvalidParam(format!(
            "payload length {len} != {nx}*{ny}*{nz}"
        )));
    }
    Ok(())
}
