//! Score-distribution summaries: binned per-(enhancer, degradation) counts
//! over a shared range, emitted as CSV and an SVG bar chart.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::report::{EvalReport, MetricVector};

/// Metrics that can be histogrammed out of a report.
pub const HISTOGRAM_METRICS: [&str; 8] = [
    "ssim",
    "psnr_db",
    "l_pp_mean",
    "l_pp_sum",
    "l_hu",
    "dice_lung",
    "dice_airway",
    "label_agreement",
];

fn metric_value(v: &MetricVector, metric: &str) -> Option<f64> {
    Some(match metric {
        "ssim" => v.ssim,
        "psnr_db" => v.psnr_db,
        "l_pp_mean" => v.l_pp_mean,
        "l_pp_sum" => v.l_pp_sum,
        "l_hu" => v.l_hu,
        "dice_lung" => v.dice_lung,
        "dice_airway" => v.dice_airway,
        "label_agreement" => v.label_agreement,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramGroup {
    pub enhancer: String,
    pub degradation: String,
    pub counts: Vec<usize>,
    pub n: usize,
    /// Count-weighted mean bin index; distribution-shift summaries compare
    /// these across groups.
    pub mean_bin_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramTable {
    pub metric: String,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub groups: Vec<HistogramGroup>,
}

/// Bin every case row of the report on a range shared across groups, one
/// group per (enhancer, degradation) cell.
pub fn score_histogram(report: &EvalReport, metric: &str, bins: usize) -> Result<HistogramTable> {
    if bins == 0 {
        return Err(Error::InvalidParam("bins must be >= 1".into()));
    }
    if report.cases.is_empty() {
        return Err(Error::InvalidParam(
            "report has no case rows to histogram".into(),
        ));
    }
    let values: Vec<(usize, f64)> = report
        .cases
        .iter()
        .enumerate()
        .map(|(i, row)| {
            metric_value(&MetricVector::from_case(&row.metrics), metric)
                .map(|v| (i, v))
                .ok_or_else(|| {
                    Error::InvalidParam(format!(
                        "unknown metric \"{metric}\" (expected one of {HISTOGRAM_METRICS:?})"
                    ))
                })
        })
        .collect::<Result<_>>()?;
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;

    let mut groups: Vec<HistogramGroup> = Vec::new();
    for (i, value) in values {
        let row = &report.cases[i];
        let idx = match groups
            .iter()
            .position(|g| g.enhancer == row.enhancer && g.degradation == row.degradation)
        {
            Some(idx) => idx,
            None => {
                groups.push(HistogramGroup {
                    enhancer: row.enhancer.clone(),
                    degradation: row.degradation.clone(),
                    counts: vec![0; bins],
                    n: 0,
                    mean_bin_index: 0.0,
                });
                groups.len() - 1
            }
        };
        let bin = if width == 0.0 {
            0
        } else {
            (((value - lo) / width) as usize).min(bins - 1)
        };
        groups[idx].counts[bin] += 1;
        groups[idx].n += 1;
    }
    for g in &mut groups {
        g.mean_bin_index = g
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| i as f64 * c as f64)
            .sum::<f64>()
            / g.n as f64;
    }
    Ok(HistogramTable {
        metric: metric.to_string(),
        lo,
        hi,
        bins,
        groups,
    })
}

impl HistogramTable {
    pub fn to_csv(&self) -> String {
        let width = (self.hi - self.lo) / self.bins as f64;
        let mut out = String::from("enhancer,degradation,bin_index,bin_lo,bin_hi,count\n");
        for g in &self.groups {
            for (i, &c) in g.counts.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{:.6},{:.6},{}\n",
                    g.enhancer,
                    g.degradation,
                    i,
                    self.lo + width * i as f64,
                    self.lo + width * (i + 1) as f64,
                    c
                ));
            }
        }
        out
    }

    /// Minimal grouped bar chart: one panel per (enhancer, degradation).
    pub fn to_svg(&self) -> String {
        let panel_w = 360.0;
        let panel_h = 120.0;
        let margin = 30.0;
        let total_h = margin + self.groups.len() as f64 * (panel_h + margin);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
            panel_w + 2.0 * margin,
            total_h
        );
        let max_count = self
            .groups
            .iter()
            .flat_map(|g| g.counts.iter())
            .copied()
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        for (gi, g) in self.groups.iter().enumerate() {
            let y0 = margin + gi as f64 * (panel_h + margin);
            svg.push_str(&format!(
                "<text x=\"{margin}\" y=\"{:.1}\" font-size=\"11\" font-family=\"monospace\">{} / {} ({}, n={})</text>\n",
                y0 - 6.0,
                g.enhancer,
                g.degradation,
                self.metric,
                g.n
            ));
            let bar_w = panel_w / self.bins as f64;
            for (i, &c) in g.counts.iter().enumerate() {
                let h = panel_h * c as f64 / max_count;
                svg.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4878a8\" stroke=\"#ffffff\"/>\n",
                    margin + i as f64 * bar_w,
                    y0 + panel_h - h,
                    bar_w,
                    h
                ));
            }
            svg.push_str(&format!(
                "<line x1=\"{margin}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333333\"/>\n",
                y0 + panel_h,
                margin + panel_w,
                y0 + panel_h
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write_files(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let base = format!("hist_{}", self.metric);
        let csv_path = out_dir.join(format!("{base}.csv"));
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let svg_path = out_dir.join(format!("{base}.svg"));
        std::fs::write(&svg_path, self.to_svg()).map_err(|e| Error::io(&svg_path, e))?;
        Ok(())
    }
}
