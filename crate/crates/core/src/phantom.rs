//! Deterministic synthetic ground-truth slices.
//!
//! Two generators: the classic ten-ellipse head phantom remapped to HU, and
//! a cartoon thorax with labeled body/lung/vessel/airway structures for
//! region-wise metrics. Both are pure functions of their spec, so cohorts
//! are reproducible from seeds alone.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::volume::{LabelMap, VolumeF32};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One ellipse of the head phantom: additive intensity `value`, semi-axes
/// `(a, b)` and center `(x0, y0)` in the unit square `[-1, 1]^2`, rotated by
/// `phi_deg` counter-clockwise.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub value: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    /// Whether normalized point `(x, y)` lies strictly inside or on the
    /// ellipse boundary.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let phi = self.phi_deg.to_radians();
        let (s, c) = phi.sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// The classic ten-ellipse head phantom parameter table.
pub const SHEPP_LOGAN_ELLIPSES: [Ellipse; 10] = [
    Ellipse { value: 2.0,   a: 0.69,   b: 0.92,   x0: 0.0,   y0: 0.0,     phi_deg: 0.0 },
    Ellipse { value: -0.98, a: 0.6624, b: 0.874,  x0: 0.0,   y0: -0.0184, phi_deg: 0.0 },
    Ellipse { value: -0.02, a: 0.11,   b: 0.31,   x0: 0.22,  y0: 0.0,     phi_deg: -18.0 },
    Ellipse { value: -0.02, a: 0.16,   b: 0.41,   x0: -0.22, y0: 0.0,     phi_deg: 18.0 },
    Ellipse { value: 0.01,  a: 0.21,   b: 0.25,   x0: 0.0,   y0: 0.35,    phi_deg: 0.0 },
    Ellipse { value: 0.01,  a: 0.046,  b: 0.046,  x0: 0.0,   y0: 0.1,     phi_deg: 0.0 },
    Ellipse { value: 0.01,  a: 0.046,  b: 0.046,  x0: 0.0,   y0: -0.1,    phi_deg: 0.0 },
    Ellipse { value: 0.01,  a: 0.046,  b: 0.023,  x0: -0.08, y0: -0.605,  phi_deg: 0.0 },
    Ellipse { value: 0.01,  a: 0.023,  b: 0.023,  x0: 0.0,   y0: -0.606,  phi_deg: 0.0 },
    Ellipse { value: 0.01,  a: 0.023,  b: 0.046,  x0: 0.06,  y0: -0.605,  phi_deg: 0.0 },
];

/// Indices (into [`SHEPP_LOGAN_ELLIPSES`]) of the ellipses that break the
/// phantom's left-right mirror symmetry.
pub const SHEPP_LOGAN_ASYMMETRIC: [usize; 4] = [2, 3, 7, 9];

/// Affine intensity-to-HU map: the background (sum 0) sits at -1000 HU and
/// the skull ellipse (sum 2) at +2000 HU.
pub fn shepp_logan_sum_to_hu(sum: f64) -> f32 {
    (-1000.0 + 1500.0 * sum) as f32
}

/// Map pixel index to the center coordinate in the normalized `[-1, 1]`
/// frame used by the ellipse table.
#[inline]
pub fn pixel_center_norm(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 + 1.0) / n as f64 - 1.0
}

/// Classic head phantom on an `n x n` grid, single slice, 1 mm pixels.
///
/// Each pixel takes the sum of the intensities of the ellipses containing
/// its center, affinely mapped to HU.
pub fn shepp_logan(n: usize) -> Result<VolumeF32> {
    shepp_logan_from(&SHEPP_LOGAN_ELLIPSES, n)
}

/// Head phantom from an arbitrary ellipse table (rotation-covariance tests
/// rasterize a rotated table through the same path).
pub fn shepp_logan_from(ellipses: &[Ellipse], n: usize) -> Result<VolumeF32> {
    if n < 16 {
        return Err(Error::InvalidParam(format!("phantom side {n} < 16")));
    }
    let mut data = vec![0.0f32; n * n];
    for iy in 0..n {
        let y = pixel_center_norm(iy, n);
        for ix in 0..n {
            let x = pixel_center_norm(ix, n);
            let mut sum = 0.0;
            for e in ellipses {
                if e.contains(x, y) {
                    sum += e.value;
                }
            }
            data[iy * n + ix] = shepp_logan_sum_to_hu(sum);
        }
    }
    VolumeF32::new((n, n, 1), (1.0, 1.0, 1.0), data)
}

/// Rotate an ellipse table about the origin by `theta` radians
/// (counter-clockwise).
pub fn rotate_ellipses(ellipses: &[Ellipse], theta: f64) -> Vec<Ellipse> {
    let (s, c) = theta.sin_cos();
    ellipses
        .iter()
        .map(|e| Ellipse {
            value: e.value,
            a: e.a,
            b: e.b,
            x0: e.x0 * c - e.y0 * s,
            y0: e.x0 * s + e.y0 * c,
            phi_deg: e.phi_deg + theta.to_degrees(),
        })
        .collect()
}

/// Label IDs produced by [`lung_phantom`].
pub mod labels {
    pub const BACKGROUND: u16 = 0;
    pub const BODY: u16 = 1;
    pub const LUNG: u16 = 2;
    pub const VESSEL: u16 = 3;
    pub const AIRWAY: u16 = 4;
}

/// HU value per tissue class of the lung phantom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TissueHu {
    pub body: f32,
    pub lung: f32,
    pub vessel: f32,
    pub airway: f32,
}

impl Default for TissueHu {
    fn default() -> Self {
        TissueHu {
            body: 40.0,
            lung: -850.0,
            vessel: 50.0,
            airway: -1000.0,
        }
    }
}

/// Parameters for the labeled thorax phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LungSpec {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_n_vessels")]
    pub n_vessels: usize,
    /// Binary branching levels of the airway tree, 0..=6.
    #[serde(default = "default_airway_depth")]
    pub airway_depth: usize,
    #[serde(default)]
    pub hu: TissueHu,
}

fn default_n_vessels() -> usize {
    12
}

fn default_airway_depth() -> usize {
    4
}

impl LungSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        LungSpec {
            n,
            seed,
            n_vessels: default_n_vessels(),
            airway_depth: default_airway_depth(),
            hu: TissueHu::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::InvalidParam(format!("phantom side {} < 16", self.n)));
        }
        if self.airway_depth > 6 {
            return Err(Error::InvalidParam(format!(
                "airway_depth {} > 6",
                self.airway_depth
            )));
        }
        for (name, v) in [
            ("body", self.hu.body),
            ("lung", self.hu.lung),
            ("vessel", self.hu.vessel),
            ("airway", self.hu.airway),
        ] {
            if !(crate::volume::HU_MIN..=crate::volume::HU_MAX).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "{name} HU {v} outside clamp range"
                )));
            }
        }
        Ok(())
    }
}

const BODY_ELLIPSE: (f64, f64, f64, f64) = (0.0, 0.0, 0.9, 0.7);
const LUNG_ELLIPSES: [(f64, f64, f64, f64); 2] =
    [(-0.42, -0.02, 0.3, 0.48), (0.42, -0.02, 0.3, 0.48)];

#[inline]
fn in_axis_ellipse(x: f64, y: f64, e: (f64, f64, f64, f64)) -> bool {
    let (x0, y0, a, b) = e;
    ((x - x0) / a).powi(2) + ((y - y0) / b).powi(2) <= 1.0
}

/// Deterministic labeled thorax slice: a soft-tissue body ellipse, two lung
/// fields, seeded vessel disks, and a recursive binary airway tree per lung.
/// Structures that would exceed the lung bounds are clipped, never an error.
pub fn lung_phantom(spec: &LungSpec) -> Result<(VolumeF32, LabelMap)> {
    spec.validate()?;
    let n = spec.n;
    let mut lab = vec![labels::BACKGROUND; n * n];

    for iy in 0..n {
        let y = pixel_center_norm(iy, n);
        for ix in 0..n {
            let x = pixel_center_norm(ix, n);
            if in_axis_ellipse(x, y, BODY_ELLIPSE) {
                lab[iy * n + ix] = labels::BODY;
                if LUNG_ELLIPSES.iter().any(|&e| in_axis_ellipse(x, y, e)) {
                    lab[iy * n + ix] = labels::LUNG;
                }
            }
        }
    }

    // Vessel disks: centers sampled uniformly inside a lung, radii a small
    // fraction of the lung size. Pixels outside the lung stay untouched.
    let mut rng = RngStream::root(spec.seed)
        .derive("phantom/lung/vessels", 0)
        .sampler();
    for _ in 0..spec.n_vessels {
        let lung = LUNG_ELLIPSES[rng.random_range(0..2)];
        let (cx, cy) = sample_in_ellipse(&mut rng, lung);
        let r = rng.random_range(0.015..0.05) * lung.2.min(lung.3);
        paint_disk(&mut lab, n, cx, cy, r, labels::VESSEL, labels::LUNG);
    }

    // Airway tree: fixed branching geometry per lung, widths halving per
    // level; lumina overwrite lung and vessel pixels only.
    for &lung in LUNG_ELLIPSES.iter() {
        if spec.airway_depth > 0 {
            let root_len = 0.42 * lung.3;
            let root_w = 0.14 * lung.2;
            airway_branch(
                &mut lab,
                n,
                lung,
                (lung.0, lung.1 - 0.55 * lung.3),
                std::f64::consts::FRAC_PI_2, // pointing toward +y
                root_len,
                root_w,
                spec.airway_depth,
            );
        }
    }

    let data = lab
        .iter()
        .map(|&id| match id {
            labels::BODY => spec.hu.body,
            labels::LUNG => spec.hu.lung,
            labels::VESSEL => spec.hu.vessel,
            labels::AIRWAY => spec.hu.airway,
            _ => -1000.0,
        })
        .collect();

    let vol = VolumeF32::new((n, n, 1), (1.0, 1.0, 1.0), data)?;
    let map = LabelMap::new((n, n, 1), (1.0, 1.0, 1.0), lab)?;
    Ok((vol, map))
}

fn sample_in_ellipse(rng: &mut impl Rng, e: (f64, f64, f64, f64)) -> (f64, f64) {
    // Rejection sampling inside the unit disk, then scale to the ellipse.
    loop {
        let u: f64 = rng.random_range(-1.0..1.0);
        let v: f64 = rng.random_range(-1.0..1.0);
        if u * u + v * v <= 1.0 {
            return (e.0 + 0.85 * u * e.2, e.1 + 0.85 * v * e.3);
        }
    }
}

fn paint_disk(lab: &mut [u16], n: usize, cx: f64, cy: f64, r: f64, id: u16, over: u16) {
    let lo_x = norm_to_pixel_floor(cx - r, n);
    let hi_x = norm_to_pixel_ceil(cx + r, n);
    let lo_y = norm_to_pixel_floor(cy - r, n);
    let hi_y = norm_to_pixel_ceil(cy + r, n);
    for iy in lo_y..=hi_y {
        let y = pixel_center_norm(iy, n);
        for ix in lo_x..=hi_x {
            let x = pixel_center_norm(ix, n);
            if (x - cx).powi(2) + (y - cy).powi(2) <= r * r && lab[iy * n + ix] == over {
                lab[iy * n + ix] = id;
            }
        }
    }
}

/// Lung ellipse shrunk slightly; airways are confined to it so a rim of
/// lung tissue always survives around the tree.
fn lung_interior(lung: (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
    (lung.0, lung.1, 0.92 * lung.2, 0.92 * lung.3)
}

#[allow(clippy::too_many_arguments)]
fn airway_branch(
    lab: &mut [u16],
    n: usize,
    lung: (f64, f64, f64, f64),
    start: (f64, f64),
    dir: f64,
    len: f64,
    width: f64,
    depth: usize,
) {
    // Stop below ~0.75 px half-width: thinner capsules rasterize as dotted
    // lines and would disconnect the tree.
    if depth == 0 || width * n as f64 / 4.0 < 0.75 {
        return;
    }
    let end = (start.0 + len * dir.cos(), start.1 + len * dir.sin());
    paint_capsule(lab, n, lung_interior(lung), start, end, width / 2.0);
    if !in_axis_ellipse(end.0, end.1, lung_interior(lung)) {
        // Branch was clipped; growing children from an outside endpoint
        // would leave detached islands.
        return;
    }
    const BRANCH_ANGLE: f64 = 0.55; // ~31.5 degrees
    for side in [-1.0, 1.0] {
        airway_branch(
            lab,
            n,
            lung,
            end,
            dir + side * BRANCH_ANGLE,
            len * 0.72,
            width / 2.0,
            depth - 1,
        );
    }
}

/// Rasterize a thick segment (round caps); only lung/vessel pixels inside
/// the lung ellipse are overwritten, which clips out-of-bounds branches.
fn paint_capsule(
    lab: &mut [u16],
    n: usize,
    lung: (f64, f64, f64, f64),
    p0: (f64, f64),
    p1: (f64, f64),
    radius: f64,
) {
    let lo_x = norm_to_pixel_floor(p0.0.min(p1.0) - radius, n);
    let hi_x = norm_to_pixel_ceil(p0.0.max(p1.0) + radius, n);
    let lo_y = norm_to_pixel_floor(p0.1.min(p1.1) - radius, n);
    let hi_y = norm_to_pixel_ceil(p0.1.max(p1.1) + radius, n);
    let seg = (p1.0 - p0.0, p1.1 - p0.1);
    let seg_len2 = seg.0 * seg.0 + seg.1 * seg.1;
    for iy in lo_y..=hi_y {
        let y = pixel_center_norm(iy, n);
        for ix in lo_x..=hi_x {
            let x = pixel_center_norm(ix, n);
            let t = if seg_len2 > 0.0 {
                (((x - p0.0) * seg.0 + (y - p0.1) * seg.1) / seg_len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let qx = p0.0 + t * seg.0;
            let qy = p0.1 + t * seg.1;
            let d2 = (x - qx).powi(2) + (y - qy).powi(2);
            let idx = iy * n + ix;
            if d2 <= radius * radius
                && in_axis_ellipse(x, y, lung)
                && (lab[idx] == labels::LUNG || lab[idx] == labels::VESSEL)
            {
                lab[idx] = labels::AIRWAY;
            }
        }
    }
}

fn norm_to_pixel_floor(x: f64, n: usize) -> usize {
    (((x + 1.0) * n as f64 / 2.0 - 0.5).floor().max(0.0) as usize).min(n - 1)
}

fn norm_to_pixel_ceil(x: f64, n: usize) -> usize {
    (((x + 1.0) * n as f64 / 2.0 - 0.5).ceil().max(0.0) as usize).min(n - 1)
}
