//! Parallel-beam acquisition operators: forward Radon transform, matched
//! adjoint back-projection, and filtered back-projection.
//!
//! Coordinate conventions. Pixel `(ix, iy)` of an `n x n` slice has its
//! center at physical `((ix - c) * px, (iy - c) * px)` with `c = (n-1)/2`;
//! detector bin `t` sits at signed offset `(t - (n_bins-1)/2) * bin_spacing`
//! from the rotation center. The ray for angle `theta` and offset `s` is the
//! line `x cos(theta) + y sin(theta) = s`.
//!
//! The forward projector is Joseph's ray-driven method: step along the
//! dominant axis of the ray, linearly interpolating across the other axis.
//! Back-projection scatters through the *same* weight enumeration, so the
//! pair is matched exactly (required for SIRT convergence) and the adjoint
//! dot-test holds to floating-point noise.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::sinogram::Sinogram;
use crate::volume::{self, VolumeF32};

/// Reconstruction filter for FBP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FbpFilter {
    pub kind: FilterKind,
    /// Cutoff as a fraction of the Nyquist frequency, in `(0, 1]`.
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    RamLak,
    Hann,
}

impl Default for FbpFilter {
    fn default() -> Self {
        FbpFilter {
            kind: FilterKind::RamLak,
            cutoff: 1.0,
        }
    }
}

impl FbpFilter {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "filter cutoff {} outside (0, 1]",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// Enumerate (pixel index, weight) pairs of the Joseph ray at angle
/// `(sin_t, cos_t)` and detector offset `s`. Forward projection and
/// back-projection both traverse rays through this single function.
#[inline]
fn traverse_ray(
    n: usize,
    px: f64,
    sin_t: f64,
    cos_t: f64,
    s: f64,
    mut visit: impl FnMut(usize, f64),
) {
    let c = (n as f64 - 1.0) / 2.0;
    if cos_t.abs() >= sin_t.abs() {
        // Ray is closer to vertical: step image rows, interpolate along x.
        let w = px / cos_t.abs();
        for iy in 0..n {
            let y = (iy as f64 - c) * px;
            let fx = (s - y * sin_t) / (cos_t * px) + c;
            let base = fx.floor();
            let frac = fx - base;
            let ix0 = base as isize;
            if ix0 >= 0 && (ix0 as usize) < n {
                visit(iy * n + ix0 as usize, w * (1.0 - frac));
            }
            let ix1 = ix0 + 1;
            if frac > 0.0 && ix1 >= 0 && (ix1 as usize) < n {
                visit(iy * n + ix1 as usize, w * frac);
            }
        }
    } else {
        // Ray is closer to horizontal: step image columns, interpolate along y.
        let w = px / sin_t.abs();
        for ix in 0..n {
            let x = (ix as f64 - c) * px;
            let fy = (s - x * cos_t) / (sin_t * px) + c;
            let base = fy.floor();
            let frac = fy - base;
            let iy0 = base as isize;
            if iy0 >= 0 && (iy0 as usize) < n {
                visit(iy0 as usize * n + ix, w * (1.0 - frac));
            }
            let iy1 = iy0 + 1;
            if frac > 0.0 && iy1 >= 0 && (iy1 as usize) < n {
                visit(iy1 as usize * n + ix, w * frac);
            }
        }
    }
}

fn check_slice(slice: &[f64], geom: &Geometry) -> Result<()> {
    if slice.len() != geom.image_n * geom.image_n {
        return Err(Error::GeometryMismatch(format!(
            "slice has {} pixels, geometry expects {}x{}",
            slice.len(),
            geom.image_n,
            geom.image_n
        )));
    }
    Ok(())
}

/// Forward Radon transform of an attenuation slice (mm^-1) over the
/// geometry's uniform angle set.
pub fn radon_forward(slice: &[f64], geom: &Geometry) -> Result<Sinogram> {
    radon_forward_at(slice, geom, &geom.angles())
}

/// Forward Radon transform over an explicit angle set.
pub fn radon_forward_at(slice: &[f64], geom: &Geometry, angles: &[f64]) -> Result<Sinogram> {
    check_slice(slice, geom)?;
    let n = geom.image_n;
    let n_bins = geom.n_bins;
    let cb = (n_bins as f64 - 1.0) / 2.0;
    let mut data = vec![0.0f64; angles.len() * n_bins];
    // Angle rows are disjoint; the per-row order is fixed, so the result is
    // identical for any worker count.
    data.par_chunks_mut(n_bins)
        .zip(angles.par_iter())
        .for_each(|(row, &theta)| {
            let (sin_t, cos_t) = theta.sin_cos();
            for (t, out) in row.iter_mut().enumerate() {
                let s = (t as f64 - cb) * geom.bin_spacing;
                let mut acc = 0.0;
                traverse_ray(n, geom.pixel_size, sin_t, cos_t, s, |idx, w| {
                    acc += slice[idx] * w;
                });
                *out = acc;
            }
        });
    Sinogram::new(angles.to_vec(), n_bins, geom.bin_spacing, data)
}

/// Exact adjoint of [`radon_forward_at`]: scatter sinogram values back along
/// the same rays with the same weights. Output is an attenuation-domain
/// image (not yet scaled for FBP).
pub fn backproject(s: &Sinogram, geom: &Geometry) -> Result<Vec<f64>> {
    geom.check_sinogram(s)?;
    let n = geom.image_n;
    let cb = (s.n_bins as f64 - 1.0) / 2.0;
    let mut img = vec![0.0f64; n * n];
    for (a, &theta) in s.angles.iter().enumerate() {
        let (sin_t, cos_t) = theta.sin_cos();
        let row = s.row(a);
        for (t, &val) in row.iter().enumerate() {
            if val == 0.0 {
                continue;
            }
            let off = (t as f64 - cb) * s.bin_spacing;
            traverse_ray(n, geom.pixel_size, sin_t, cos_t, off, |idx, w| {
                img[idx] += val * w;
            });
        }
    }
    Ok(img)
}

/// Band-limited ramp filter response on a zero-padded grid of length `pad`.
///
/// Built from the spatial-domain ramp kernel (h[0] = 1/(4 ds^2),
/// h[k] = -1/(pi k ds)^2 for odd k) rather than a raw |f| sample, which
/// keeps the DC term consistent with the finite detector.
fn ramp_response(pad: usize, bin_spacing: f64, filter: &FbpFilter) -> Vec<f64> {
    let ds = bin_spacing;
    let mut h = vec![Complex::new(0.0, 0.0); pad];
    h[0].re = 1.0 / (4.0 * ds * ds);
    let mut k = 1usize;
    while k <= pad / 2 {
        let v = -1.0 / (std::f64::consts::PI * k as f64 * ds).powi(2);
        h[k].re = v;
        h[pad - k].re = v;
        k += 2;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(pad).process(&mut h);

    (0..pad)
        .map(|k| {
            let cyc = k.min(pad - k) as f64;
            let f_frac = cyc / (pad as f64 / 2.0); // fraction of Nyquist
            let base = h[k].re * ds;
            if f_frac > filter.cutoff + 1e-12 {
                0.0
            } else {
                match filter.kind {
                    FilterKind::RamLak => base,
                    FilterKind::Hann => {
                        base * 0.5
                            * (1.0 + (std::f64::consts::PI * f_frac / filter.cutoff).cos())
                    }
                }
            }
        })
        .collect()
}

/// Ramp-filter every projection row (frequency domain, zero-padded to the
/// next power of two >= 2*n_bins).
pub fn filter_sinogram(s: &Sinogram, filter: &FbpFilter) -> Result<Sinogram> {
    filter.validate()?;
    let pad = (2 * s.n_bins).next_power_of_two().max(64);
    let response = ramp_response(pad, s.bin_spacing, filter);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(pad);
    let inv = planner.plan_fft_inverse(pad);

    let n_bins = s.n_bins;
    let mut out = vec![0.0f64; s.data.len()];
    out.par_chunks_mut(n_bins)
        .zip(s.data.par_chunks(n_bins))
        .for_each(|(dst, src)| {
            let mut buf = vec![Complex::new(0.0, 0.0); pad];
            for (b, &v) in buf.iter_mut().zip(src.iter()) {
                b.re = v;
            }
            fwd.process(&mut buf);
            for (b, &r) in buf.iter_mut().zip(response.iter()) {
                *b *= r;
            }
            inv.process(&mut buf);
            let norm = 1.0 / pad as f64;
            for (d, b) in dst.iter_mut().zip(buf.iter()) {
                *d = b.re * norm;
            }
        });
    Sinogram::new(s.angles.clone(), n_bins, s.bin_spacing, out)
}

/// Filtered back-projection: ramp-filter each projection, back-project
/// through the matched adjoint, scale by `pi/n_angles` (times the
/// `ds/px^2` weight the adjoint's ray footprint carries), and convert to
/// clamped HU.
pub fn fbp(s: &Sinogram, filter: &FbpFilter, geom: &Geometry) -> Result<VolumeF32> {
    if s.n_angles() < 2 {
        return Err(Error::InvalidParam(format!(
            "FBP requires >= 2 angles, got {}",
            s.n_angles()
        )));
    }
    geom.check_sinogram(s)?;
    let filtered = filter_sinogram(s, filter)?;
    let bp = backproject(&filtered, geom)?;
    let scale = std::f64::consts::PI * s.bin_spacing
        / (s.n_angles() as f64 * geom.pixel_size * geom.pixel_size);
    let data = bp
        .iter()
        .map(|&mu| volume::clamp_hu((1000.0 * (mu * scale / geom.mu_water - 1.0)) as f32))
        .collect();
    VolumeF32::new(
        (geom.image_n, geom.image_n, 1),
        (geom.pixel_size, geom.pixel_size, 1.0),
        data,
    )
}

/// HU volume slice -> sinogram: per-voxel HU->mu conversion followed by the
/// forward Radon transform.
pub fn sinogram_of(v: &VolumeF32, z: usize, geom: &Geometry) -> Result<Sinogram> {
    if v.dims.0 != geom.image_n || v.dims.1 != geom.image_n {
        return Err(Error::GeometryMismatch(format!(
            "volume slice {}x{} vs geometry {}x{}",
            v.dims.0, v.dims.1, geom.image_n, geom.image_n
        )));
    }
    let mu: Vec<f64> = v
        .slice(z)
        .iter()
        .map(|&hu| volume::hu_to_mu_scalar(hu, geom.mu_water))
        .collect();
    radon_forward(&mu, geom)
}

/// Sinogram for every axial slice of a volume.
pub fn sinogram_stack(v: &VolumeF32, geom: &Geometry) -> Result<Vec<Sinogram>> {
    (0..v.dims.2).map(|z| sinogram_of(v, z, geom)).collect()
}
