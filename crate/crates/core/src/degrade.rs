//! Validated degradation transforms: sparse-view, low-dose, conventional,
//! and their ordered or per-case-random composition.
//!
//! Sparse-view and low-dose act in Radon space (project, corrupt,
//! reconstruct); conventional degradation acts purely in the image domain
//! (downsample, inject noise, upsample). All are per-slice and draw from
//! dedicated [`RngStream`]s, so outputs are byte-reproducible per seed.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::projector::{self, FbpFilter};
use crate::rng::RngStream;
use crate::sinogram::Sinogram;
use crate::volume::{clamp_hu, VolumeF32};

/// Angular subsampling: keep every k-th projection. `k = 1` is the
/// full-view baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseViewSpec {
    pub k: usize,
}

/// Photon-starvation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowDoseMode {
    /// Sample `Poisson(alpha * p) / alpha` per bin; the 1/alpha rescale
    /// keeps `E[p_hat] = p` so HU calibration survives reconstruction.
    Paper,
    /// Transmission-domain model: `I ~ Poisson(i0 * exp(-p))`,
    /// `p_hat = -ln(max(I, 0.5) / i0)`.
    Transmission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowDoseSpec {
    /// Dose factor; larger is cleaner.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_low_dose_mode")]
    pub mode: LowDoseMode,
    /// Unattenuated photons per bin (transmission mode only).
    #[serde(default = "default_i0")]
    pub i0: f64,
}

fn default_alpha() -> f64 {
    50.0
}

fn default_low_dose_mode() -> LowDoseMode {
    LowDoseMode::Paper
}

fn default_i0() -> f64 {
    1.0e5
}

/// Image-domain degradation: area downsample, Gaussian + signal-dependent
/// Poisson noise at the coarse grid, bilinear upsample back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionalSpec {
    /// Downsampling factor; 1 keeps full resolution (noise-only mode).
    pub scale: usize,
    /// Gaussian noise sigma in HU.
    #[serde(default)]
    pub sigma_gauss: f64,
    /// Photons per (HU + 1024) unit; large values make shot noise vanish.
    #[serde(default = "default_photon_scale")]
    pub photon_scale: f64,
}

fn default_photon_scale() -> f64 {
    10.0
}

/// Composition rule for mixed degradation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    /// Apply every stage in order.
    Sequential,
    /// Draw one stage uniformly per case.
    RandomPerCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedSpec {
    pub stages: Vec<DegradeSpec>,
    #[serde(default = "default_mix_mode")]
    pub mode: MixMode,
}

fn default_mix_mode() -> MixMode {
    MixMode::RandomPerCase
}

/// A degradation transform, selectable from JSON configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradeSpec {
    SparseView(SparseViewSpec),
    LowDose(LowDoseSpec),
    Conventional(ConventionalSpec),
    Mixed(MixedSpec),
}

impl DegradeSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DegradeSpec::SparseView(s) => {
                if s.k == 0 {
                    return Err(Error::InvalidParam("sparse-view stride must be >= 1".into()));
                }
            }
            DegradeSpec::LowDose(s) => {
                if !s.alpha.is_finite() || s.alpha <= 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "low-dose alpha {} must be > 0",
                        s.alpha
                    )));
                }
                if s.mode == LowDoseMode::Transmission && s.i0 < 10.0 {
                    return Err(Error::InvalidParam(format!(
                        "transmission i0 {} must be >= 10",
                        s.i0
                    )));
                }
            }
            DegradeSpec::Conventional(s) => {
                if !(1..=4).contains(&s.scale) {
                    return Err(Error::InvalidParam(format!(
                        "conventional scale {} must be in 1..=4",
                        s.scale
                    )));
                }
                if s.sigma_gauss < 0.0 {
                    return Err(Error::InvalidParam("sigma_gauss must be >= 0".into()));
                }
                if !s.photon_scale.is_finite() || s.photon_scale <= 0.0 {
                    return Err(Error::InvalidParam("photon_scale must be > 0".into()));
                }
            }
            DegradeSpec::Mixed(m) => {
                if m.stages.is_empty() {
                    return Err(Error::InvalidParam("mixed stage list is empty".into()));
                }
                for s in &m.stages {
                    s.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Short name used in reports and stream tags.
    pub fn kind_name(&self) -> &'static str {
        match self {
            DegradeSpec::SparseView(_) => "sparse_view",
            DegradeSpec::LowDose(_) => "low_dose",
            DegradeSpec::Conventional(_) => "conventional",
            DegradeSpec::Mixed(_) => "mixed",
        }
    }
}

/// Dispatch a degradation spec against a volume.
pub fn apply(
    x: &VolumeF32,
    spec: &DegradeSpec,
    geom: &Geometry,
    filter: &FbpFilter,
    stream: &RngStream,
) -> Result<VolumeF32> {
    spec.validate()?;
    match spec {
        DegradeSpec::SparseView(s) => degrade_sparse_view(x, s.k, geom, filter),
        DegradeSpec::LowDose(s) => degrade_low_dose(x, s, geom, filter, stream),
        DegradeSpec::Conventional(s) => degrade_conventional(x, s, stream),
        DegradeSpec::Mixed(m) => degrade_mixed(x, m, geom, filter, stream),
    }
}

fn per_slice_recon(
    x: &VolumeF32,
    geom: &Geometry,
    mut slice_op: impl FnMut(usize, Sinogram) -> Result<VolumeF32>,
) -> Result<VolumeF32> {
    let mut out = x.clone();
    for z in 0..x.dims.2 {
        let p = projector::sinogram_of(x, z, geom)?;
        let recon = slice_op(z, p)?;
        out.slice_mut(z).copy_from_slice(recon.slice(0));
    }
    Ok(out)
}

/// Sparse-view degradation: project, keep every k-th angle from index 0,
/// reconstruct. Deterministic (no RNG).
pub fn degrade_sparse_view(
    x: &VolumeF32,
    k: usize,
    geom: &Geometry,
    filter: &FbpFilter,
) -> Result<VolumeF32> {
    if k == 0 {
        return Err(Error::InvalidParam("sparse-view stride must be >= 1".into()));
    }
    per_slice_recon(x, geom, |_z, p| {
        let kept = if k == 1 { p } else { p.subsample_angles(k)? };
        projector::fbp(&kept, filter, geom)
    })
}

/// Corrupt one sinogram with the low-dose photon model. Exposed so the
/// expectation-preservation statistics can be checked directly on bins.
pub fn low_dose_noise(p: &Sinogram, spec: &LowDoseSpec, stream: &RngStream) -> Result<Sinogram> {
    let mut rng = stream.sampler();
    let mut data = Vec::with_capacity(p.data.len());
    match spec.mode {
        LowDoseMode::Paper => {
            for &v in &p.data {
                let lambda = spec.alpha * v.max(0.0);
                let counts = sample_poisson(&mut rng, lambda)?;
                data.push(counts / spec.alpha);
            }
        }
        LowDoseMode::Transmission => {
            for &v in &p.data {
                let lambda = spec.i0 * (-v.max(0.0)).exp();
                let counts = sample_poisson(&mut rng, lambda)?;
                data.push(-(counts.max(0.5) / spec.i0).ln());
            }
        }
    }
    Sinogram::new(p.angles.clone(), p.n_bins, p.bin_spacing, data)
}

fn sample_poisson(rng: &mut impl Rng, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(lambda)
        .map_err(|e| Error::InvalidParam(format!("poisson rate {lambda}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Low-dose degradation: Poisson photon noise in Radon space, then FBP.
pub fn degrade_low_dose(
    x: &VolumeF32,
    spec: &LowDoseSpec,
    geom: &Geometry,
    filter: &FbpFilter,
    stream: &RngStream,
) -> Result<VolumeF32> {
    DegradeSpec::LowDose(spec.clone()).validate()?;
    per_slice_recon(x, geom, |z, p| {
        let noisy = low_dose_noise(&p, spec, &stream.derive("degrade/low_dose", z as u64))?;
        projector::fbp(&noisy, filter, geom)
    })
}

/// Conventional degradation: area-average downsample, Gaussian noise,
/// signal-dependent Poisson noise (offset by +1024 so rates are
/// non-negative), bilinear upsample, clamp.
pub fn degrade_conventional(
    x: &VolumeF32,
    spec: &ConventionalSpec,
    stream: &RngStream,
) -> Result<VolumeF32> {
    DegradeSpec::Conventional(spec.clone()).validate()?;
    let (nx, ny, nz) = x.dims;
    let mut out = x.clone();
    for z in 0..nz {
        let child = stream.derive("degrade/conventional", z as u64);
        let mut rng = child.sampler();
        let mut coarse = area_downsample(x.slice(z), nx, ny, spec.scale);
        let (mx, my) = coarse_dims(nx, ny, spec.scale);

        if spec.sigma_gauss > 0.0 {
            let normal = Normal::new(0.0, spec.sigma_gauss)
                .map_err(|e| Error::InvalidParam(format!("sigma_gauss: {e}")))?;
            for v in &mut coarse {
                *v += normal.sample(&mut rng);
            }
        }
        for v in &mut coarse {
            let rate = (*v + 1024.0).max(0.0) * spec.photon_scale;
            *v = sample_poisson(&mut rng, rate)? / spec.photon_scale - 1024.0;
        }

        let fine = bilinear_upsample(&coarse, mx, my, nx, ny, spec.scale);
        for (dst, v) in out.slice_mut(z).iter_mut().zip(fine) {
            *dst = clamp_hu(v as f32);
        }
    }
    Ok(out)
}

fn coarse_dims(nx: usize, ny: usize, scale: usize) -> (usize, usize) {
    (nx.div_ceil(scale), ny.div_ceil(scale))
}

fn area_downsample(slice: &[f32], nx: usize, ny: usize, scale: usize) -> Vec<f64> {
    if scale == 1 {
        return slice.iter().map(|&v| v as f64).collect();
    }
    let (mx, my) = coarse_dims(nx, ny, scale);
    let mut out = vec![0.0f64; mx * my];
    for by in 0..my {
        let y0 = by * scale;
        let y1 = (y0 + scale).min(ny);
        for bx in 0..mx {
            let x0 = bx * scale;
            let x1 = (x0 + scale).min(nx);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += slice[y * nx + x] as f64;
                }
            }
            out[by * mx + bx] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

fn bilinear_upsample(
    coarse: &[f64],
    mx: usize,
    my: usize,
    nx: usize,
    ny: usize,
    scale: usize,
) -> Vec<f64> {
    if scale == 1 {
        return coarse.to_vec();
    }
    let sample = |fx: f64, fy: f64| -> f64 {
        let fx = fx.clamp(0.0, (mx - 1) as f64);
        let fy = fy.clamp(0.0, (my - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(mx - 1);
        let y1 = (y0 + 1).min(my - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = coarse[y0 * mx + x0] + (coarse[y0 * mx + x1] - coarse[y0 * mx + x0]) * tx;
        let bot = coarse[y1 * mx + x0] + (coarse[y1 * mx + x1] - coarse[y1 * mx + x0]) * tx;
        top + (bot - top) * ty
    };
    let s = scale as f64;
    let mut out = vec![0.0f64; nx * ny];
    for y in 0..ny {
        let fy = (y as f64 + 0.5) / s - 0.5;
        for x in 0..nx {
            let fx = (x as f64 + 0.5) / s - 0.5;
            out[y * nx + x] = sample(fx, fy);
        }
    }
    out
}

/// Mixed degradation: in [`MixMode::Sequential`] thread the volume through
/// every stage in order; in [`MixMode::RandomPerCase`] draw one stage
/// uniformly from the case stream.
pub fn degrade_mixed(
    x: &VolumeF32,
    spec: &MixedSpec,
    geom: &Geometry,
    filter: &FbpFilter,
    stream: &RngStream,
) -> Result<VolumeF32> {
    if spec.stages.is_empty() {
        return Err(Error::InvalidParam("mixed stage list is empty".into()));
    }
    match spec.mode {
        MixMode::Sequential => {
            let mut cur = x.clone();
            for (i, stage) in spec.stages.iter().enumerate() {
                cur = apply(&cur, stage, geom, filter, &stream.derive("mixed/stage", i as u64))?;
            }
            Ok(cur)
        }
        MixMode::RandomPerCase => {
            let mut rng = stream.derive("mixed/choice", 0).sampler();
            let idx = rng.random_range(0..spec.stages.len());
            apply(
                x,
                &spec.stages[idx],
                geom,
                filter,
                &stream.derive("mixed/stage", idx as u64),
            )
        }
    }
}
