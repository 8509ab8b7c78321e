//! Projection data over (angle, detector bin).

use crate::error::{Error, Result};

/// Parallel-beam projection data.
///
/// `data[a * n_bins + t]` is the line integral of attenuation along the ray
/// at `angles[a]`, offset `(t - (n_bins-1)/2) * bin_spacing` mm from the
/// rotation center. Values are dimensionless optical depths; they are
/// non-negative for noise-free inputs but may dip slightly below zero after
/// transmission-domain noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    /// Projection angles in radians, strictly increasing, all in `[0, pi)`.
    pub angles: Vec<f64>,
    /// Detector bins per angle.
    pub n_bins: usize,
    /// Detector bin spacing in mm.
    pub bin_spacing: f64,
    /// `angles.len() * n_bins` values, angle-major.
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn new(angles: Vec<f64>, n_bins: usize, bin_spacing: f64, data: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || n_bins == 0 {
            return Err(Error::InvalidParam("empty sinogram grid".into()));
        }
        if bin_spacing <= 0.0 {
            return Err(Error::InvalidParam("bin_spacing must be > 0".into()));
        }
        for w in angles.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParam("angles must be strictly increasing".into()));
            }
        }
        if angles[0] < 0.0 || *angles.last().unwrap() >= std::f64::consts::PI {
            return Err(Error::InvalidParam("angles must lie in [0, pi)".into()));
        }
        if data.len() != angles.len() * n_bins {
            return Err(Error::InvalidParam(format!(
                "sinogram payload length {} != {}*{}",
                data.len(),
                angles.len(),
                n_bins
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite sinogram value at index {i}"
            )));
        }
        Ok(Sinogram {
            angles,
            n_bins,
            bin_spacing,
            data,
        })
    }

    pub fn zeros(angles: Vec<f64>, n_bins: usize, bin_spacing: f64) -> Result<Self> {
        let n = angles.len() * n_bins;
        Sinogram::new(angles, n_bins, bin_spacing, vec![0.0; n])
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    /// Borrow one projection (all bins at angle index `a`).
    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.n_bins..(a + 1) * self.n_bins]
    }

    pub fn row_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.data[a * self.n_bins..(a + 1) * self.n_bins]
    }

    /// Keep every `stride`-th angle starting at index 0.
    pub fn subsample_angles(&self, stride: usize) -> Result<Sinogram> {
        if stride == 0 {
            return Err(Error::InvalidParam("stride must be >= 1".into()));
        }
        let kept: Vec<usize> = (0..self.n_angles()).step_by(stride).collect();
        if kept.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "angle subsampling by {} leaves {} angles (need >= 2)",
                stride,
                kept.len()
            )));
        }
        let angles = kept.iter().map(|&a| self.angles[a]).collect();
        let mut data = Vec::with_capacity(kept.len() * self.n_bins);
        for &a in &kept {
            data.extend_from_slice(self.row(a));
        }
        Sinogram::new(angles, self.n_bins, self.bin_spacing, data)
    }
}
