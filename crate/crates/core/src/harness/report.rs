//! Evaluation report structures and their CSV/JSON/plain-table renderers.
//!
//! Rows are ordered by (enhancer, degradation, case index) as configured,
//! so serialized reports are byte-identical across reruns and worker
//! counts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::CaseMetrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub toolkit_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl ReportMeta {
    pub fn new(seed: u64, config_hash: String) -> Self {
        ReportMeta {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub enhancer: String,
    pub degradation: String,
    pub case_id: String,
    #[serde(flatten)]
    pub metrics: CaseMetrics,
}

/// The scalar metrics aggregated per report cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    pub ssim: f64,
    pub psnr_db: f64,
    pub l_pp_mean: f64,
    pub l_pp_sum: f64,
    pub l_hu: f64,
    pub dice_lung: f64,
    pub dice_airway: f64,
    pub label_agreement: f64,
}

impl MetricVector {
    pub fn from_case(m: &CaseMetrics) -> Self {
        MetricVector {
            ssim: m.ssim,
            psnr_db: m.psnr_db,
            l_pp_mean: m.l_pp_mean,
            l_pp_sum: m.l_pp_sum,
            l_hu: m.l_hu,
            dice_lung: m.dice_lung,
            dice_airway: m.dice_airway,
            label_agreement: m.label_agreement,
        }
    }

    fn fields(&self) -> [f64; 8] {
        [
            self.ssim,
            self.psnr_db,
            self.l_pp_mean,
            self.l_pp_sum,
            self.l_hu,
            self.dice_lung,
            self.dice_airway,
            self.label_agreement,
        ]
    }

    fn from_fields(f: [f64; 8]) -> Self {
        MetricVector {
            ssim: f[0],
            psnr_db: f[1],
            l_pp_mean: f[2],
            l_pp_sum: f[3],
            l_hu: f[4],
            dice_lung: f[5],
            dice_airway: f[6],
            label_agreement: f[7],
        }
    }

    /// Element-wise mean and population std over a non-empty set.
    pub fn aggregate(items: &[MetricVector]) -> (MetricVector, MetricVector) {
        let n = items.len() as f64;
        let mut mean = [0.0f64; 8];
        for it in items {
            for (m, v) in mean.iter_mut().zip(it.fields()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0f64; 8];
        for it in items {
            for ((s, v), m) in var.iter_mut().zip(it.fields()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut var {
            *s = (*s / n).sqrt();
        }
        (MetricVector::from_fields(mean), MetricVector::from_fields(var))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub enhancer: String,
    pub degradation: String,
    pub n_cases: usize,
    pub mean: MetricVector,
    pub std: MetricVector,
}

/// Cohort-level Pearson correlation of per-region measurements between
/// ground truth and enhanced volumes, one row per (cell, region).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub enhancer: String,
    pub degradation: String,
    pub region_id: u16,
    /// r of region mean HU across cases; None when variance degenerates.
    pub pearson_mean_hu: Option<f64>,
    /// r of segmented region voxel counts across cases.
    pub pearson_voxel_count: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    /// None when the degradation itself failed (affects every enhancer).
    pub enhancer: Option<String>,
    pub degradation: String,
    pub case_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub cases: Vec<CaseRow>,
    pub aggregates: Vec<AggregateRow>,
    pub cohort_correlations: Vec<CohortRow>,
    pub failures: Vec<FailureRow>,
}

pub const CSV_HEADER: &str = "enhancer,degradation,case_id,ssim,psnr_db,l_pp_mean,l_pp_sum,l_hu,dice_lung,dice_airway,label_agreement";

fn csv_metric_fields(v: &MetricVector) -> String {
    format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        v.ssim,
        v.psnr_db,
        v.l_pp_mean,
        v.l_pp_sum,
        v.l_hu,
        v.dice_lung,
        v.dice_airway,
        v.label_agreement
    )
}

impl EvalReport {
    /// Case rows followed by one aggregate row (the cell mean, case_id
    /// "aggregate") per (enhancer, degradation) cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.cases {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.enhancer,
                row.degradation,
                row.case_id,
                csv_metric_fields(&MetricVector::from_case(&row.metrics))
            ));
        }
        for agg in &self.aggregates {
            out.push_str(&format!(
                "{},{},aggregate,{}\n",
                agg.enhancer,
                agg.degradation,
                csv_metric_fields(&agg.mean)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table in the four-condition layout: one row per enhancer,
    /// one SSIM/PSNR column pair per degradation (SSIM on the 0-100 scale).
    pub fn to_table(&self, degradation_order: &[String], enhancer_order: &[String]) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<16}", "method"));
        for d in degradation_order {
            out.push_str(&format!("{:>12}{:>7}", d, ""));
        }
        out.push('\n');
        out.push_str(&format!("{:<16}", ""));
        for _ in degradation_order {
            out.push_str(&format!("{:>12}{:>7}", "SSIM", "PSNR"));
        }
        out.push('\n');
        for e in enhancer_order {
            out.push_str(&format!("{e:<16}"));
            for d in degradation_order {
                match self
                    .aggregates
                    .iter()
                    .find(|a| &a.enhancer == e && &a.degradation == d)
                {
                    Some(a) => out.push_str(&format!(
                        "{:>12.1}{:>7.1}",
                        a.mean.ssim * 100.0,
                        a.mean.psnr_db
                    )),
                    None => out.push_str(&format!("{:>12}{:>7}", "-", "-")),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_files(
        &self,
        out_dir: &Path,
        degradation_order: &[String],
        enhancer_order: &[String],
    ) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let csv_path = out_dir.join("report.csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = out_dir.join("report.json");
        std::fs::write(&json_path, self.to_json()).map_err(|e| Error::io(&json_path, e))?;
        let table_path = out_dir.join("table.txt");
        std::fs::write(&table_path, self.to_table(degradation_order, enhancer_order))
            .map_err(|e| Error::io(&table_path, e))?;
        Ok(())
    }
}

// -- ablation --

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub degradation: String,
    pub ssim: f64,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// "w/o. <degradation>" or "all degrades".
    pub label: String,
    pub enhancer: String,
    /// Name of the degradation left out of tuning; None for the "all" row.
    pub excluded: Option<String>,
    /// Human-readable tuned parameters, "-" when the enhancer has none.
    pub tuned_params: String,
    pub cells: Vec<AblationCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub meta: ReportMeta,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("enhancer,row,tuned_params,degradation,ssim,psnr_db\n");
        for row in &self.rows {
            for cell in &row.cells {
                out.push_str(&format!(
                    "{},{},{},{},{:.6},{:.6}\n",
                    row.enhancer, row.label, row.tuned_params, cell.degradation, cell.ssim,
                    cell.psnr_db
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Leave-one-out grid, one block per enhancer: rows are tuning
    /// conditions, columns are test degradations.
    pub fn to_table(&self, degradation_order: &[String]) -> String {
        let mut out = String::new();
        let mut current = None::<&str>;
        for row in &self.rows {
            if current != Some(row.enhancer.as_str()) {
                current = Some(row.enhancer.as_str());
                out.push_str(&format!("\n[{}]\n{:<24}", row.enhancer, "method"));
                for d in degradation_order {
                    out.push_str(&format!("{:>12}{:>7}", d, ""));
                }
                out.push('\n');
                out.push_str(&format!("{:<24}", ""));
                for _ in degradation_order {
                    out.push_str(&format!("{:>12}{:>7}", "SSIM", "PSNR"));
                }
                out.push('\n');
            }
            out.push_str(&format!("{:<24}", row.label));
            for d in degradation_order {
                match row.cells.iter().find(|c| &c.degradation == d) {
                    Some(c) => {
                        out.push_str(&format!("{:>12.1}{:>7.1}", c.ssim * 100.0, c.psnr_db))
                    }
                    None => out.push_str(&format!("{:>12}{:>7}", "-", "-")),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_files(&self, out_dir: &Path, degradation_order: &[String]) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let csv_path = out_dir.join("ablate.csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = out_dir.join("ablate.json");
        std::fs::write(&json_path, self.to_json()).map_err(|e| Error::io(&json_path, e))?;
        let table_path = out_dir.join("ablate.txt");
        std::fs::write(&table_path, self.to_table(degradation_order))
            .map_err(|e| Error::io(&table_path, e))?;
        Ok(())
    }
}
