//! Enhancement operators mapping a degraded volume back toward ground
//! truth: classical baselines (non-local means, total-variation denoising,
//! SIRT) plus a file-exchange adapter for external learned enhancers.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::io;
use crate::projector;
use crate::sinogram::Sinogram;
use crate::volume::{clamp_hu, VolumeF32};

/// Non-local means parameters. `h` is the filtering strength in HU;
/// `sigma` is the optional noise-compensation term subtracted from patch
/// distances (0 = classic NLM).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlmSpec {
    pub patch_radius: usize,
    pub search_radius: usize,
    pub h: f64,
    pub sigma: f64,
}

impl Default for NlmSpec {
    fn default() -> Self {
        NlmSpec {
            patch_radius: 2,
            search_radius: 5,
            h: 45.0,
            sigma: 0.0,
        }
    }
}

/// ROF total-variation denoising with a fixed iteration budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvSpec {
    /// Regularization weight in HU.
    pub lambda: f64,
    #[serde(default = "default_tv_iters")]
    pub iters: usize,
}

fn default_tv_iters() -> usize {
    100
}

/// Simultaneous iterative reconstruction from a re-projected sinogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SirtSpec {
    pub iters: usize,
    /// Relaxation factor omega in (0, 2).
    pub relaxation: f64,
}

impl Default for SirtSpec {
    fn default() -> Self {
        SirtSpec {
            iters: 50,
            relaxation: 1.0,
        }
    }
}

/// External enhancer invoked through the directory-exchange protocol:
/// the degraded volume is written to `{in}`, the command runs, and the
/// enhanced volume is read back from `{out}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    /// Shell command template containing `{in}` and `{out}` placeholders.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancerSpec {
    Identity,
    Nlm(NlmSpec),
    Tv(TvSpec),
    Sirt(SirtSpec),
    External(ExternalSpec),
}

impl EnhancerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnhancerSpec::Identity => {}
            EnhancerSpec::Nlm(s) => {
                if s.patch_radius == 0 || s.search_radius == 0 {
                    return Err(Error::InvalidParam("NLM radii must be >= 1".into()));
                }
                if !s.h.is_finite() || s.h <= 0.0 {
                    return Err(Error::InvalidParam("NLM h must be > 0".into()));
                }
                if s.sigma < 0.0 {
                    return Err(Error::InvalidParam("NLM sigma must be >= 0".into()));
                }
            }
            EnhancerSpec::Tv(s) => {
                if !s.lambda.is_finite() || s.lambda <= 0.0 {
                    return Err(Error::InvalidParam("TV lambda must be > 0".into()));
                }
                if s.iters == 0 {
                    return Err(Error::InvalidParam("TV iters must be >= 1".into()));
                }
            }
            EnhancerSpec::Sirt(s) => {
                if s.iters == 0 {
                    return Err(Error::InvalidParam("SIRT iters must be >= 1".into()));
                }
                if !(s.relaxation > 0.0 && s.relaxation < 2.0) {
                    return Err(Error::InvalidParam(format!(
                        "SIRT relaxation {} outside (0, 2)",
                        s.relaxation
                    )));
                }
            }
            EnhancerSpec::External(s) => {
                if !s.command.contains("{in}") || !s.command.contains("{out}") {
                    return Err(Error::InvalidParam(
                        "external command must contain {in} and {out} placeholders".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EnhancerSpec::Identity => "identity",
            EnhancerSpec::Nlm(_) => "nlm",
            EnhancerSpec::Tv(_) => "tv",
            EnhancerSpec::Sirt(_) => "sirt",
            EnhancerSpec::External(_) => "external",
        }
    }
}

/// Dispatch an enhancer against a degraded volume. SIRT re-projects the
/// volume through `geom`; external enhancers exchange files under
/// `workdir`.
pub fn apply(
    degraded: &VolumeF32,
    spec: &EnhancerSpec,
    geom: &Geometry,
    workdir: Option<&Path>,
) -> Result<VolumeF32> {
    spec.validate()?;
    match spec {
        EnhancerSpec::Identity => Ok(degraded.clone()),
        EnhancerSpec::Nlm(s) => enhance_nlm(degraded, s),
        EnhancerSpec::Tv(s) => enhance_tv(degraded, s),
        EnhancerSpec::Sirt(s) => {
            let mut out = degraded.clone();
            for z in 0..degraded.dims.2 {
                let p = projector::sinogram_of(degraded, z, geom)?;
                let recon = enhance_sirt(&p, s, geom)?;
                out.slice_mut(z).copy_from_slice(recon.slice(0));
            }
            Ok(out)
        }
        EnhancerSpec::External(s) => {
            let dir = workdir.ok_or_else(|| {
                Error::External("external enhancer requires an exchange directory".into())
            })?;
            enhance_external(degraded, s, dir)
        }
    }
}

// ---------------------------------------------------------------------------
// Non-local means
// ---------------------------------------------------------------------------

/// Mirror-pad index into `0..n`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // A couple of bounces is enough for any pad < n.
    while i < 0 || i >= n {
        if i < 0 {
            i = -i - 1;
        }
        if i >= n {
            i = 2 * n - 1 - i;
        }
    }
    i as usize
}

/// Per-slice non-local means: every pixel becomes the weight-normalized
/// average over its search window, with weights
/// `exp(-max(d^2 - 2*sigma^2, 0) / h^2)` where `d^2` is the mean squared
/// patch difference.
pub fn enhance_nlm(x: &VolumeF32, spec: &NlmSpec) -> Result<VolumeF32> {
    EnhancerSpec::Nlm(spec.clone()).validate()?;
    let (nx, ny, nz) = x.dims;
    let pr = spec.patch_radius as isize;
    let sr = spec.search_radius as isize;
    let pad = (pr + sr) as usize;
    let pnx = nx + 2 * pad;
    let pny = ny + 2 * pad;
    let patch_area = ((2 * pr + 1) * (2 * pr + 1)) as f64;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let noise_floor = 2.0 * spec.sigma * spec.sigma;

    let mut out = x.clone();
    for z in 0..nz {
        let slice = x.slice(z);
        // Mirror-padded copy.
        let mut padded = vec![0.0f64; pnx * pny];
        for py in 0..pny {
            let sy = reflect(py as isize - pad as isize, ny);
            for px in 0..pnx {
                let sx = reflect(px as isize - pad as isize, nx);
                padded[py * pnx + px] = slice[sy * nx + sx] as f64;
            }
        }

        let mut num = vec![0.0f64; nx * ny];
        let mut den = vec![0.0f64; nx * ny];
        let mut diff2 = vec![0.0f64; pnx * pny];
        let mut row_sum = vec![0.0f64; pnx * pny];

        for dy in -sr..=sr {
            for dx in -sr..=sr {
                // Squared difference field between the slice and its
                // (dx, dy)-shifted copy, on the padded grid.
                let lo_y = (pr.max(pr - dy)) as usize;
                let hi_y = pny as isize - pr.max(pr + dy);
                let lo_x = (pr.max(pr - dx)) as usize;
                let hi_x = pnx as isize - pr.max(pr + dx);
                for py in lo_y..hi_y as usize {
                    let qy = (py as isize + dy) as usize;
                    for px in lo_x..hi_x as usize {
                        let qx = (px as isize + dx) as usize;
                        let d = padded[py * pnx + px] - padded[qy * pnx + qx];
                        diff2[py * pnx + px] = d * d;
                    }
                }
                // Patch box sums, separable, direct taps (keeps per-pixel
                // arithmetic translation-invariant).
                for py in lo_y..hi_y as usize {
                    for px in pad..pad + nx {
                        let mut acc = 0.0;
                        for k in -pr..=pr {
                            acc += diff2[py * pnx + (px as isize + k) as usize];
                        }
                        row_sum[py * pnx + px] = acc;
                    }
                }
                for y in 0..ny {
                    let py = y + pad;
                    for xx in 0..nx {
                        let px = xx + pad;
                        let mut acc = 0.0;
                        for k in -pr..=pr {
                            acc += row_sum[(py as isize + k) as usize * pnx + px];
                        }
                        let d2 = acc / patch_area;
                        let w = (-((d2 - noise_floor).max(0.0)) * inv_h2).exp();
                        let i = y * nx + xx;
                        num[i] += w * padded[(py as isize + dy) as usize * pnx
                            + (px as isize + dx) as usize];
                        den[i] += w;
                    }
                }
            }
        }

        let dst = out.slice_mut(z);
        for i in 0..nx * ny {
            dst[i] = clamp_hu((num[i] / den[i]) as f32);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

/// ROF objective `0.5 * ||u - f||^2 + lambda * TV(u)` with isotropic TV on
/// forward differences.
pub fn tv_objective(u: &[f64], f: &[f64], nx: usize, ny: usize, lambda: f64) -> f64 {
    let mut fidelity = 0.0;
    for i in 0..u.len() {
        fidelity += (u[i] - f[i]).powi(2);
    }
    let mut tv = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            let gx = if x + 1 < nx { u[i + 1] - u[i] } else { 0.0 };
            let gy = if y + 1 < ny { u[i + nx] - u[i] } else { 0.0 };
            tv += (gx * gx + gy * gy).sqrt();
        }
    }
    0.5 * fidelity + lambda * tv
}

fn tv_denoise_slice(f: &[f64], nx: usize, ny: usize, spec: &TvSpec) -> (Vec<f64>, Vec<f64>) {
    // Chambolle dual projection: u = f - lambda * div p, with the dual
    // field p updated by a projected gradient step of size tau = 1/8.
    let tau = 0.125;
    let lambda = spec.lambda;
    let n = nx * ny;
    let mut px = vec![0.0f64; n];
    let mut py = vec![0.0f64; n];
    let mut u = f.to_vec();
    let mut objectives = Vec::with_capacity(spec.iters);

    let mut div = vec![0.0f64; n];
    for _ in 0..spec.iters {
        // div p (backward differences, the adjoint of forward gradient).
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                let dxp = if x == 0 {
                    px[i]
                } else if x == nx - 1 {
                    -px[i - 1]
                } else {
                    px[i] - px[i - 1]
                };
                let dyp = if y == 0 {
                    py[i]
                } else if y == ny - 1 {
                    -py[i - nx]
                } else {
                    py[i] - py[i - nx]
                };
                div[i] = dxp + dyp;
            }
        }
        // Gradient of (div p - f / lambda), projected update of p.
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                let gx = if x + 1 < nx {
                    (div[i + 1] - f[i + 1] / lambda) - (div[i] - f[i] / lambda)
                } else {
                    0.0
                };
                let gy = if y + 1 < ny {
                    (div[i + nx] - f[i + nx] / lambda) - (div[i] - f[i] / lambda)
                } else {
                    0.0
                };
                let norm = (gx * gx + gy * gy).sqrt();
                px[i] = (px[i] + tau * gx) / (1.0 + tau * norm);
                py[i] = (py[i] + tau * gy) / (1.0 + tau * norm);
            }
        }
        // Primal estimate from the dual field.
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                let dxp = if x == 0 {
                    px[i]
                } else if x == nx - 1 {
                    -px[i - 1]
                } else {
                    px[i] - px[i - 1]
                };
                let dyp = if y == 0 {
                    py[i]
                } else if y == ny - 1 {
                    -py[i - nx]
                } else {
                    py[i] - py[i - nx]
                };
                u[i] = f[i] - lambda * (dxp + dyp);
            }
        }
        objectives.push(tv_objective(&u, f, nx, ny, lambda));
    }
    (u, objectives)
}

/// TV denoising; returns the result plus the per-iteration objective trace
/// of the last slice (used by monotonicity checks).
pub fn enhance_tv_with_objective(x: &VolumeF32, spec: &TvSpec) -> Result<(VolumeF32, Vec<f64>)> {
    EnhancerSpec::Tv(spec.clone()).validate()?;
    let (nx, ny, nz) = x.dims;
    let mut out = x.clone();
    let mut last_obj = Vec::new();
    for z in 0..nz {
        let f: Vec<f64> = x.slice(z).iter().map(|&v| v as f64).collect();
        let (u, obj) = tv_denoise_slice(&f, nx, ny, spec);
        for (dst, v) in out.slice_mut(z).iter_mut().zip(u) {
            *dst = clamp_hu(v as f32);
        }
        last_obj = obj;
    }
    Ok((out, last_obj))
}

/// TV denoising (fixed iteration budget, deterministic runtime).
pub fn enhance_tv(x: &VolumeF32, spec: &TvSpec) -> Result<VolumeF32> {
    Ok(enhance_tv_with_objective(x, spec)?.0)
}

// ---------------------------------------------------------------------------
// SIRT
// ---------------------------------------------------------------------------

/// SIRT reconstruction with residual trace:
/// `x_{k+1} = x_k + omega * C * A^T * R * (p - A x_k)` with row/column-sum
/// normalizers R, C built from the matched projector pair.
pub fn sirt_with_residuals(
    p: &Sinogram,
    spec: &SirtSpec,
    geom: &Geometry,
) -> Result<(VolumeF32, Vec<f64>)> {
    if spec.iters == 0 {
        return Err(Error::InvalidParam("SIRT iters must be >= 1".into()));
    }
    geom.check_sinogram(p)?;
    let n = geom.image_n;
    let angles = p.angles.clone();

    // Row sums: forward projection of an all-ones image.
    let ones_img = vec![1.0f64; n * n];
    let row_sums = projector::radon_forward_at(&ones_img, geom, &angles)?;
    let row_inv: Vec<f64> = row_sums
        .data
        .iter()
        .map(|&s| if s > 1e-12 { 1.0 / s } else { 0.0 })
        .collect();
    // Column sums: back-projection of an all-ones sinogram.
    let ones_sino = Sinogram::new(
        angles.clone(),
        p.n_bins,
        p.bin_spacing,
        vec![1.0; p.data.len()],
    )?;
    let col_sums = projector::backproject(&ones_sino, geom)?;
    let col_inv: Vec<f64> = col_sums
        .iter()
        .map(|&s| if s > 1e-12 { 1.0 / s } else { 0.0 })
        .collect();

    let mut x = vec![0.0f64; n * n];
    let mut residuals = Vec::with_capacity(spec.iters);
    let mut grew = 0u32;
    let mut prev = f64::INFINITY;
    for _ in 0..spec.iters {
        let ax = projector::radon_forward_at(&x, geom, &angles)?;
        let mut r = vec![0.0f64; p.data.len()];
        let mut norm2 = 0.0;
        for i in 0..r.len() {
            let d = p.data[i] - ax.data[i];
            norm2 += d * d;
            r[i] = d * row_inv[i];
        }
        let resid = norm2.sqrt();
        if resid > prev {
            grew += 1;
            if grew >= 3 {
                return Err(Error::SirtDiverged {
                    omega: spec.relaxation,
                });
            }
        } else {
            grew = 0;
        }
        prev = resid;
        residuals.push(resid);

        let weighted = Sinogram::new(angles.clone(), p.n_bins, p.bin_spacing, r)?;
        let update = projector::backproject(&weighted, geom)?;
        for i in 0..x.len() {
            x[i] += spec.relaxation * col_inv[i] * update[i];
        }
    }

    let data = x
        .iter()
        .map(|&mu| clamp_hu((1000.0 * (mu / geom.mu_water - 1.0)) as f32))
        .collect();
    let vol = VolumeF32::new(
        (n, n, 1),
        (geom.pixel_size, geom.pixel_size, 1.0),
        data,
    )?;
    Ok((vol, residuals))
}

/// Iterative least-squares reconstruction of a single sinogram.
pub fn enhance_sirt(p: &Sinogram, spec: &SirtSpec, geom: &Geometry) -> Result<VolumeF32> {
    Ok(sirt_with_residuals(p, spec, geom)?.0)
}

// ---------------------------------------------------------------------------
// External exchange
// ---------------------------------------------------------------------------

/// Run an external enhancer over the directory-exchange protocol. Writes
/// `workdir/in.ctk`, substitutes `{in}`/`{out}` into the command, runs it
/// through the shell, and validates the returned volume.
pub fn enhance_external(x: &VolumeF32, spec: &ExternalSpec, workdir: &Path) -> Result<VolumeF32> {
    EnhancerSpec::External(spec.clone()).validate()?;
    std::fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let in_path = workdir.join("in.ctk");
    let out_path = workdir.join("out.ctk");
    io::write_volume(x, &in_path)?;
    let cmd = spec
        .command
        .replace("{in}", &in_path.to_string_lossy())
        .replace("{out}", &out_path.to_string_lossy());
    let output = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| Error::External(format!("failed to spawn `{cmd}`: {e}")))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(Error::External(format!(
            "command `{cmd}` exited with {}: {}",
            output.status,
            stderr.trim()
        )));
    }
    let result = io::read_volume_hu(&out_path)?;
    if result.dims != x.dims {
        return Err(Error::DimsMismatch {
            a: x.dims,
            b: result.dims,
        });
    }
    Ok(result)
}
