//! Parallel-beam acquisition geometry binding the image grid to the
//! sinogram grid.

use crate::error::{Error, Result};
use crate::volume::VolumeF32;
use serde::{Deserialize, Serialize};

/// Default linear attenuation of water in mm^-1 (~70 keV effective energy).
pub const DEFAULT_MU_WATER: f64 = 0.019;
/// Default number of projection angles over `[0, pi)`.
pub const DEFAULT_N_ANGLES: usize = 720;

/// Square-slice parallel-beam geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Side length of the square image grid in pixels.
    pub image_n: usize,
    /// Pixel size in mm.
    pub pixel_size: f64,
    /// Number of projection angles, equally spaced over `[0, pi)`.
    pub n_angles: usize,
    /// Detector bins per projection.
    pub n_bins: usize,
    /// Detector bin spacing in mm.
    pub bin_spacing: f64,
    /// Linear attenuation of water in mm^-1 for HU<->mu conversion.
    pub mu_water: f64,
}

impl Geometry {
    /// Standard geometry for an `n x n` slice: `ceil(sqrt(2)*n)` bins at
    /// pixel pitch, which covers the image diagonal.
    pub fn standard(image_n: usize, pixel_size: f64, n_angles: usize) -> Result<Geometry> {
        let n_bins = (std::f64::consts::SQRT_2 * image_n as f64).ceil() as usize;
        Geometry {
            image_n,
            pixel_size,
            n_angles,
            n_bins,
            bin_spacing: pixel_size,
            mu_water: DEFAULT_MU_WATER,
        }
        .validated()
    }

    /// Geometry matching a volume's slice grid (requires square pixels).
    pub fn for_volume(v: &VolumeF32, n_angles: usize) -> Result<Geometry> {
        if v.dims.0 != v.dims.1 {
            return Err(Error::GeometryMismatch(format!(
                "slices must be square, got {}x{}",
                v.dims.0, v.dims.1
            )));
        }
        if (v.spacing.0 - v.spacing.1).abs() > 1e-12 {
            return Err(Error::GeometryMismatch(format!(
                "pixels must be square, got spacing {}x{}",
                v.spacing.0, v.spacing.1
            )));
        }
        Geometry::standard(v.dims.0, v.spacing.0, n_angles)
    }

    pub fn validated(self) -> Result<Geometry> {
        if self.image_n < 2 {
            return Err(Error::InvalidParam("image_n must be >= 2".into()));
        }
        if self.pixel_size <= 0.0 || self.bin_spacing <= 0.0 {
            return Err(Error::InvalidParam("pixel/bin size must be > 0".into()));
        }
        if self.n_angles < 2 {
            return Err(Error::InvalidParam("n_angles must be >= 2".into()));
        }
        if self.mu_water <= 0.0 {
            return Err(Error::InvalidParam("mu_water must be > 0".into()));
        }
        let diagonal = self.image_n as f64 * self.pixel_size * std::f64::consts::SQRT_2;
        if (self.n_bins as f64) * self.bin_spacing < diagonal - 1e-9 {
            return Err(Error::GeometryMismatch(format!(
                "detector span {} mm does not cover image diagonal {} mm",
                self.n_bins as f64 * self.bin_spacing,
                diagonal
            )));
        }
        Ok(self)
    }

    /// The uniform angle set `a * pi / n_angles`, `a = 0..n_angles`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angles)
            .map(|a| a as f64 * std::f64::consts::PI / self.n_angles as f64)
            .collect()
    }

    /// Check that a sinogram matches this geometry's detector grid.
    pub fn check_sinogram(&self, s: &crate::sinogram::Sinogram) -> Result<()> {
        if s.n_bins != self.n_bins {
            return Err(Error::GeometryMismatch(format!(
                "sinogram has {} bins, geometry expects {}",
                s.n_bins, self.n_bins
            )));
        }
        if (s.bin_spacing - self.bin_spacing).abs() > 1e-9 {
            return Err(Error::GeometryMismatch(format!(
                "sinogram bin spacing {} != geometry bin spacing {}",
                s.bin_spacing, self.bin_spacing
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_covers_diagonal() {
        for n in [16, 63, 256] {
            let g = Geometry::standard(n, 0.7, 90).unwrap();
            assert!(g.n_bins as f64 * g.bin_spacing >= n as f64 * 0.7 * std::f64::consts::SQRT_2);
        }
    }

    #[test]
    fn narrow_detector_rejected() {
        let g = Geometry {
            image_n: 64,
            pixel_size: 1.0,
            n_angles: 90,
            n_bins: 64,
            bin_spacing: 1.0,
            mu_water: 0.019,
        };
        assert!(g.validated().is_err());
    }

    #[test]
    fn angle_set_spans_half_turn() {
        let g = Geometry::standard(32, 1.0, 4).unwrap();
        let angles = g.angles();
        assert_eq!(angles.len(), 4);
        assert_eq!(angles[0], 0.0);
        assert!((angles[3] - 3.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }
}
