//! Quantitative evaluation: SSIM, PSNR, pixel-wise and per-region HU
//! consistency, mask agreement, and Pearson correlation.
//!
//! All statistics are computed in f64 regardless of the f32 voxel storage;
//! each metric is checked against a naive reference implementation in the
//! test suite.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelMap, VolumeF32, HU_RANGE};

/// Default `data_range` for SSIM/PSNR: the width of the HU clamp range.
pub const DATA_RANGE: f64 = HU_RANGE;

fn check_dims(a: &VolumeF32, b: &VolumeF32) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::DimsMismatch {
            a: a.dims,
            b: b.dims,
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB, capped at 99.0 (the zero-MSE value).
pub fn psnr(a: &VolumeF32, b: &VolumeF32, data_range: f64) -> Result<f64> {
    check_dims(a, b)?;
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(99.0);
    }
    Ok((10.0 * (data_range * data_range / mse).log10()).min(99.0))
}

/// Mean absolute difference in HU.
pub fn l_pp(a: &VolumeF32, b: &VolumeF32) -> Result<f64> {
    Ok(l_pp_sum(a, b)? / a.data.len() as f64)
}

/// Summed absolute difference in HU (the raw L1 norm).
pub fn l_pp_sum(a: &VolumeF32, b: &VolumeF32) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum())
}

/// Parameters of single-scale SSIM.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimParams {
    /// Square window side; must be odd.
    pub window: usize,
    /// Gaussian sigma of the window weights.
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: DATA_RANGE,
        }
    }
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let mut k: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode convolution with a 1D kernel applied along x then y.
fn gauss_valid(field: &[f64], nx: usize, ny: usize, kernel: &[f64]) -> Vec<f64> {
    let w = kernel.len();
    let ox = nx - w + 1;
    let oy = ny - w + 1;
    let mut rows = vec![0.0f64; ox * ny];
    for y in 0..ny {
        for x in 0..ox {
            let mut acc = 0.0;
            for (k, &g) in kernel.iter().enumerate() {
                acc += g * field[y * nx + x + k];
            }
            rows[y * ox + x] = acc;
        }
    }
    let mut out = vec![0.0f64; ox * oy];
    for y in 0..oy {
        for x in 0..ox {
            let mut acc = 0.0;
            for (k, &g) in kernel.iter().enumerate() {
                acc += g * rows[(y + k) * ox + x];
            }
            out[y * ox + x] = acc;
        }
    }
    out
}

/// Mean single-scale SSIM over the valid window positions of every slice
/// (slices weighted equally). Symmetric in `(a, b)`.
pub fn ssim(a: &VolumeF32, b: &VolumeF32, params: &SsimParams) -> Result<f64> {
    check_dims(a, b)?;
    let (nx, ny, nz) = a.dims;
    if params.window.is_multiple_of(2) || params.window < 3 {
        return Err(Error::InvalidParam(format!(
            "SSIM window {} must be odd and >= 3",
            params.window
        )));
    }
    if nx < params.window || ny < params.window {
        return Err(Error::InvalidParam(format!(
            "image {}x{} smaller than SSIM window {}",
            nx, ny, params.window
        )));
    }
    let kernel = gaussian_kernel(params.window, params.sigma);
    let c1 = (params.k1 * params.data_range).powi(2);
    let c2 = (params.k2 * params.data_range).powi(2);

    let mut slice_mean_sum = 0.0f64;
    for z in 0..nz {
        let xa: Vec<f64> = a.slice(z).iter().map(|&v| v as f64).collect();
        let xb: Vec<f64> = b.slice(z).iter().map(|&v| v as f64).collect();
        let aa: Vec<f64> = xa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = xb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x * y).collect();

        let mu_a = gauss_valid(&xa, nx, ny, &kernel);
        let mu_b = gauss_valid(&xb, nx, ny, &kernel);
        let m_aa = gauss_valid(&aa, nx, ny, &kernel);
        let m_bb = gauss_valid(&bb, nx, ny, &kernel);
        let m_ab = gauss_valid(&ab, nx, ny, &kernel);

        let mut acc = 0.0f64;
        for i in 0..mu_a.len() {
            let va = m_aa[i] - mu_a[i] * mu_a[i];
            let vb = m_bb[i] - mu_b[i] * mu_b[i];
            let cov = m_ab[i] - mu_a[i] * mu_b[i];
            let num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
            let den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
            acc += num / den;
        }
        slice_mean_sum += acc / mu_a.len() as f64;
    }
    Ok(slice_mean_sum / nz as f64)
}

/// Per-region voxel count and HU statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionStats {
    pub region_id: u16,
    pub voxel_count: usize,
    pub mean_hu: f64,
    pub std_hu: f64,
}

/// Statistics for every non-background region present in the label map
/// (empty regions are omitted).
pub fn region_stats(x: &VolumeF32, labels: &LabelMap) -> Result<Vec<RegionStats>> {
    labels.check_aligned(x.dims)?;
    let mut acc: BTreeMap<u16, (usize, f64, f64)> = BTreeMap::new();
    for (&hu, &id) in x.data.iter().zip(&labels.data) {
        if id == 0 {
            continue;
        }
        let e = acc.entry(id).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += hu as f64;
        e.2 += (hu as f64) * (hu as f64);
    }
    Ok(acc
        .into_iter()
        .map(|(region_id, (n, sum, sumsq))| {
            let mean = sum / n as f64;
            let var = (sumsq / n as f64 - mean * mean).max(0.0);
            RegionStats {
                region_id,
                voxel_count: n,
                mean_hu: mean,
                std_hu: var.sqrt(),
            }
        })
        .collect())
}

/// HU consistency: sum over regions of |mean_c(a) - mean_c(b)|.
pub fn l_hu(a: &VolumeF32, b: &VolumeF32, labels: &LabelMap) -> Result<f64> {
    check_dims(a, b)?;
    let sa = region_stats(a, labels)?;
    let sb = region_stats(b, labels)?;
    // Same label map on both sides, so the region sets match.
    Ok(sa
        .iter()
        .zip(&sb)
        .map(|(ra, rb)| (ra.mean_hu - rb.mean_hu).abs())
        .sum())
}

/// HU thresholds of the built-in segmenter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRules {
    /// Lung candidate: HU strictly below this.
    pub lung_max_hu: f32,
    /// Airway: HU strictly below this, inside lung.
    pub airway_max_hu: f32,
    /// Body: HU strictly above this.
    pub body_min_hu: f32,
    /// Number of largest non-border lung components to keep.
    pub lung_components: usize,
}

impl Default for ThresholdRules {
    fn default() -> Self {
        ThresholdRules {
            lung_max_hu: -400.0,
            airway_max_hu: -950.0,
            body_min_hu: -200.0,
            lung_components: 2,
        }
    }
}

/// Label IDs emitted by [`threshold_segment`]; chosen to line up with the
/// lung phantom's ID scheme.
pub mod seg_ids {
    pub const BODY: u16 = 1;
    pub const LUNG: u16 = 2;
    pub const AIRWAY: u16 = 4;
}

/// Rule-based segmentation: lung = largest non-border components below the
/// lung threshold (per slice, 4-connected), airway = very low HU inside
/// lung, body = soft tissue and above. Priority airway > lung > body.
pub fn threshold_segment(v: &VolumeF32, rules: &ThresholdRules) -> LabelMap {
    let (nx, ny, nz) = v.dims;
    let mut out = LabelMap::zeros(v.dims, v.spacing);
    for z in 0..nz {
        let slice = v.slice(z);
        let lung_mask = largest_interior_components(
            slice,
            nx,
            ny,
            rules.lung_max_hu,
            rules.lung_components,
        );
        let dst = &mut out.data[z * nx * ny..(z + 1) * nx * ny];
        for i in 0..nx * ny {
            if lung_mask[i] {
                dst[i] = if slice[i] < rules.airway_max_hu {
                    seg_ids::AIRWAY
                } else {
                    seg_ids::LUNG
                };
            } else if slice[i] > rules.body_min_hu {
                dst[i] = seg_ids::BODY;
            }
        }
    }
    out
}

/// 4-connected components of `hu < threshold` that do not touch the slice
/// border; keep the `keep` largest.
fn largest_interior_components(
    slice: &[f32],
    nx: usize,
    ny: usize,
    threshold: f32,
    keep: usize,
) -> Vec<bool> {
    let mut comp = vec![usize::MAX; nx * ny];
    let mut sizes: Vec<(usize, bool)> = Vec::new(); // (size, touches_border)
    for start in 0..nx * ny {
        if slice[start] >= threshold || comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0usize;
        let mut border = false;
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % nx, p / nx);
            if x == 0 || y == 0 || x == nx - 1 || y == ny - 1 {
                border = true;
            }
            let mut visit = |q: usize| {
                if slice[q] < threshold && comp[q] == usize::MAX {
                    comp[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < nx {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - nx);
            }
            if y + 1 < ny {
                visit(p + nx);
            }
        }
        sizes.push((size, border));
    }
    let mut candidates: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .filter(|(_, &(_, border))| !border)
        .map(|(id, &(size, _))| (size, id))
        .collect();
    candidates.sort_unstable_by(|a, b| b.cmp(a));
    let kept: BTreeSet<usize> = candidates.into_iter().take(keep).map(|(_, id)| id).collect();
    comp.iter().map(|&c| c != usize::MAX && kept.contains(&c)).collect()
}

/// Result of comparing two segmentations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegAgreement {
    /// Dice per region ID present in either map. Both-empty regions are not
    /// listed; one-sided regions score 0.
    pub dice: BTreeMap<u16, f64>,
    /// Fraction of voxels with identical labels (background included).
    pub label_agreement: f64,
}

/// Dice and voxel agreement between two aligned label maps.
pub fn mask_agreement(a: &LabelMap, b: &LabelMap) -> Result<SegAgreement> {
    a.check_aligned(b.dims)?;
    let mut inter: BTreeMap<u16, usize> = BTreeMap::new();
    let mut count_a: BTreeMap<u16, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<u16, usize> = BTreeMap::new();
    let mut equal = 0usize;
    for (&ia, &ib) in a.data.iter().zip(&b.data) {
        if ia == ib {
            equal += 1;
            if ia != 0 {
                *inter.entry(ia).or_default() += 1;
            }
        }
        if ia != 0 {
            *count_a.entry(ia).or_default() += 1;
        }
        if ib != 0 {
            *count_b.entry(ib).or_default() += 1;
        }
    }
    let ids: BTreeSet<u16> = count_a.keys().chain(count_b.keys()).copied().collect();
    let dice = ids
        .into_iter()
        .map(|id| {
            let na = count_a.get(&id).copied().unwrap_or(0);
            let nb = count_b.get(&id).copied().unwrap_or(0);
            let i = inter.get(&id).copied().unwrap_or(0);
            (id, 2.0 * i as f64 / (na + nb) as f64)
        })
        .collect();
    Ok(SegAgreement {
        dice,
        label_agreement: equal as f64 / a.data.len() as f64,
    })
}

/// Segment both volumes with the built-in rules and compare the masks.
pub fn seg_agreement(
    a: &VolumeF32,
    b: &VolumeF32,
    rules: &ThresholdRules,
) -> Result<SegAgreement> {
    check_dims(a, b)?;
    mask_agreement(&threshold_segment(a, rules), &threshold_segment(b, rules))
}

/// Sample Pearson correlation coefficient over (truth, enhanced) pairs.
pub fn pearson_r(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "pearson_r needs >= 3 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance(
            "zero variance on one side of the pairing".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// All per-case metrics of one (enhanced, truth) comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub ssim: f64,
    pub psnr_db: f64,
    pub l_pp_mean: f64,
    pub l_pp_sum: f64,
    pub l_hu: f64,
    /// Dice per threshold-segmenter region ID (stringified for JSON).
    pub dice: BTreeMap<String, f64>,
    pub dice_lung: f64,
    pub dice_airway: f64,
    pub label_agreement: f64,
}

/// Evaluate one case: `candidate` against ground truth `truth`.
///
/// `truth_labels` (when available, e.g. from a phantom) define the regions
/// for the HU consistency term; otherwise the threshold segmentation of the
/// truth volume stands in. Dice always compares threshold segmentations of
/// the two volumes, mirroring mask-based boundary checks.
pub fn case_metrics(
    candidate: &VolumeF32,
    truth: &VolumeF32,
    truth_labels: Option<&LabelMap>,
    rules: &ThresholdRules,
) -> Result<CaseMetrics> {
    let ssim_v = ssim(candidate, truth, &SsimParams::default())?;
    let psnr_v = psnr(candidate, truth, DATA_RANGE)?;
    let l_pp_mean = l_pp(candidate, truth)?;
    let l_pp_sum_v = l_pp_sum(candidate, truth)?;
    let owned_labels;
    let labels = match truth_labels {
        Some(l) => l,
        None => {
            owned_labels = threshold_segment(truth, rules);
            &owned_labels
        }
    };
    let l_hu_v = l_hu(candidate, truth, labels)?;
    let seg = seg_agreement(truth, candidate, rules)?;
    // A region absent from both maps is perfect agreement on absence.
    let dice_of = |id: u16| seg.dice.get(&id).copied().unwrap_or(1.0);
    Ok(CaseMetrics {
        ssim: ssim_v,
        psnr_db: psnr_v,
        l_pp_mean,
        l_pp_sum: l_pp_sum_v,
        l_hu: l_hu_v,
        dice_lung: dice_of(seg_ids::LUNG),
        dice_airway: dice_of(seg_ids::AIRWAY),
        label_agreement: seg.label_agreement,
        dice: seg
            .dice
            .into_iter()
            .map(|(id, d)| (id.to_string(), d))
            .collect(),
    })
}
