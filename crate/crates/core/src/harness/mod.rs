//! Cohort orchestration: degrade -> enhance -> evaluate pipelines,
//! leave-one-out ablation grids, and score histograms.
//!
//! Per-case failures are recorded in the report and never abort the run;
//! configuration problems abort before any work. Cases run concurrently,
//! but report assembly follows the fixed (enhancer, degradation, case)
//! order, so outputs are byte-identical for any worker count.

pub mod config;
pub mod hist;
pub mod report;

pub use config::{
    DirSource, GeometryOverrides, NamedDegradation, NamedEnhancer, PhantomKind, PhantomSource,
    PipelineConfig, SourceConfig, TuningGrid,
};
pub use hist::{score_histogram, HistogramGroup, HistogramTable};
pub use report::{
    AblationCell, AblationReport, AblationRow, AggregateRow, CaseRow, CohortRow, EvalReport,
    FailureRow, MetricVector, ReportMeta,
};

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rayon::prelude::*;

use crate::degrade;
use crate::enhance::{self, EnhancerSpec};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::io;
use crate::metrics::{self, ThresholdRules};
use crate::phantom;
use crate::rng::RngStream;
use crate::volume::{LabelMap, VolumeF32};

/// One ground-truth case of the cohort.
#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub volume: VolumeF32,
    pub labels: Option<LabelMap>,
}

/// Optional dedicated thread pool (byte-identical results either way).
struct Workers(Option<rayon::ThreadPool>);

impl Workers {
    fn new(threads: Option<usize>) -> Result<Self> {
        match threads {
            None => Ok(Workers(None)),
            Some(t) => Ok(Workers(Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            ))),
        }
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.0 {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}

/// Materialize the cohort described by the config source.
pub fn load_cases(cfg: &PipelineConfig) -> Result<Vec<Case>> {
    match &cfg.source {
        SourceConfig::Phantom(p) => {
            let root = RngStream::root(cfg.seed);
            (0..p.cases)
                .map(|i| {
                    let id = format!("case{i:03}");
                    match p.kind {
                        PhantomKind::SheppLogan => Ok(Case {
                            id,
                            volume: phantom::shepp_logan(p.n)?,
                            labels: None,
                        }),
                        PhantomKind::Lung => {
                            let mut spec = phantom::LungSpec::new(
                                p.n,
                                root.derive("phantom/case", i as u64).stream_id,
                            );
                            if let Some(v) = p.n_vessels {
                                spec.n_vessels = v;
                            }
                            if let Some(d) = p.airway_depth {
                                spec.airway_depth = d;
                            }
                            let (volume, labels) = phantom::lung_phantom(&spec)?;
                            Ok(Case {
                                id,
                                volume,
                                labels: Some(labels),
                            })
                        }
                    }
                })
                .collect()
        }
        SourceConfig::Dir(d) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&d.path)
                .map_err(|e| Error::io(&d.path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|e| e == "ctk")
                        && !p
                            .file_name()
                            .is_some_and(|n| n.to_string_lossy().ends_with(".labels.ctk"))
                })
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::Config(format!(
                    "no .ctk volumes under {}",
                    d.path.display()
                )));
            }
            paths
                .into_iter()
                .map(|p| {
                    let volume = io::read_volume_hu(&p)?;
                    let stem = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "case".into());
                    let label_path = p.with_file_name(format!("{stem}.labels.ctk"));
                    let labels = if label_path.exists() {
                        let l = io::read_labels(&label_path)?;
                        l.check_aligned(volume.dims)?;
                        Some(l)
                    } else {
                        None
                    };
                    Ok(Case {
                        id: stem,
                        volume,
                        labels,
                    })
                })
                .collect()
        }
    }
}

fn case_geometry(cfg: &PipelineConfig, v: &VolumeF32) -> Result<Geometry> {
    let mut g = Geometry::for_volume(v, cfg.n_angles())?;
    if let Some(mw) = cfg.geometry.mu_water {
        g.mu_water = mw;
        g = g.validated()?;
    }
    Ok(g)
}

/// Correlation pairs harvested from one evaluated cell.
struct CellPairs {
    /// (region id, truth mean HU, enhanced mean HU)
    hu: Vec<(u16, f64, f64)>,
    /// (region id, truth segmented voxels, enhanced segmented voxels)
    size: Vec<(u16, f64, f64)>,
}

struct CellOutcome {
    enhancer_idx: usize,
    metrics: std::result::Result<metrics::CaseMetrics, String>,
    pairs: CellPairs,
}

struct CaseOutcome {
    case_idx: usize,
    degradation_idx: usize,
    degrade_error: Option<String>,
    cells: Vec<CellOutcome>,
}

fn harvest_pairs(
    truth: &VolumeF32,
    truth_labels: Option<&LabelMap>,
    truth_seg: &LabelMap,
    enhanced: &VolumeF32,
    rules: &ThresholdRules,
) -> CellPairs {
    let labels = truth_labels.unwrap_or(truth_seg);
    let mut hu = Vec::new();
    if let (Ok(ts), Ok(es)) = (
        metrics::region_stats(truth, labels),
        metrics::region_stats(enhanced, labels),
    ) {
        for (t, e) in ts.iter().zip(&es) {
            hu.push((t.region_id, t.mean_hu, e.mean_hu));
        }
    }
    let enh_seg = metrics::threshold_segment(enhanced, rules);
    let count = |seg: &LabelMap, id: u16| seg.data.iter().filter(|&&x| x == id).count() as f64;
    let size = [
        metrics::seg_ids::BODY,
        metrics::seg_ids::LUNG,
        metrics::seg_ids::AIRWAY,
    ]
    .iter()
    .map(|&id| (id, count(truth_seg, id), count(&enh_seg, id)))
    .collect();
    CellPairs { hu, size }
}

fn run_case_degradation(
    cfg: &PipelineConfig,
    case_idx: usize,
    case: &Case,
    deg_idx: usize,
    geom: &Geometry,
    rules: &ThresholdRules,
) -> CaseOutcome {
    let deg = &cfg.degradations[deg_idx];
    let filter = cfg.filter();
    let stream = RngStream::root(cfg.seed)
        .derive("case", case_idx as u64)
        .derive(&format!("degrade/{}", deg.name), deg_idx as u64);
    let degraded = match degrade::apply(&case.volume, &deg.spec, geom, &filter, &stream) {
        Ok(v) => v,
        Err(e) => {
            return CaseOutcome {
                case_idx,
                degradation_idx: deg_idx,
                degrade_error: Some(e.to_string()),
                cells: Vec::new(),
            }
        }
    };

    if cfg.save_volumes {
        let dir = cfg.out_dir.join("cases").join(&case.id);
        let _ = std::fs::create_dir_all(&dir);
        let _ = io::write_volume(&degraded, &dir.join(format!("{}.ctk", deg.name)));
    }

    let truth_seg = metrics::threshold_segment(&case.volume, rules);
    let cells = cfg
        .enhancers
        .iter()
        .enumerate()
        .map(|(enh_idx, enh)| {
            let workdir = cfg
                .out_dir
                .join("exchange")
                .join(&case.id)
                .join(&deg.name)
                .join(&enh.name);
            let evaluated = enhance::apply(&degraded, &enh.spec, geom, Some(&workdir))
                .and_then(|enhanced| {
                    if cfg.save_volumes {
                        let dir = cfg.out_dir.join("cases").join(&case.id);
                        let _ = std::fs::create_dir_all(&dir);
                        let _ = io::write_volume(
                            &enhanced,
                            &dir.join(format!("{}_{}.ctk", deg.name, enh.name)),
                        );
                    }
                    let m = metrics::case_metrics(
                        &enhanced,
                        &case.volume,
                        case.labels.as_ref(),
                        rules,
                    )?;
                    let pairs = harvest_pairs(
                        &case.volume,
                        case.labels.as_ref(),
                        &truth_seg,
                        &enhanced,
                        rules,
                    );
                    Ok((m, pairs))
                });
            match evaluated {
                Ok((m, pairs)) => CellOutcome {
                    enhancer_idx: enh_idx,
                    metrics: Ok(m),
                    pairs,
                },
                Err(e) => CellOutcome {
                    enhancer_idx: enh_idx,
                    metrics: Err(e.to_string()),
                    pairs: CellPairs {
                        hu: Vec::new(),
                        size: Vec::new(),
                    },
                },
            }
        })
        .collect();

    CaseOutcome {
        case_idx,
        degradation_idx: deg_idx,
        degrade_error: None,
        cells,
    }
}

/// Run the full degrade -> enhance -> evaluate pipeline and write
/// report.csv / report.json / table.txt under the configured out_dir.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let cases = load_cases(cfg)?;
    let rules = ThresholdRules::default();
    let geoms: Vec<Geometry> = cases
        .iter()
        .map(|c| case_geometry(cfg, &c.volume))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..cfg.degradations.len()).map(move |d| (c, d)))
        .collect();

    let workers = Workers::new(cfg.threads)?;
    let outcomes: Vec<CaseOutcome> = workers.run(|| {
        jobs.par_iter()
            .map(|&(c, d)| run_case_degradation(cfg, c, &cases[c], d, &geoms[c], &rules))
            .collect()
    });

    assemble_report(cfg, &cases, outcomes)
}

fn assemble_report(
    cfg: &PipelineConfig,
    cases: &[Case],
    outcomes: Vec<CaseOutcome>,
) -> Result<EvalReport> {
    let mut case_rows = Vec::new();
    let mut failures = Vec::new();
    let mut cell_metrics: BTreeMap<(usize, usize), Vec<MetricVector>> = BTreeMap::new();
    let mut hu_pairs: BTreeMap<(usize, usize, u16), Vec<(f64, f64)>> = BTreeMap::new();
    let mut size_pairs: BTreeMap<(usize, usize, u16), Vec<(f64, f64)>> = BTreeMap::new();

    let mut sorted = outcomes;
    sorted.sort_by_key(|o| (o.case_idx, o.degradation_idx));
    for outcome in sorted {
        let deg_name = &cfg.degradations[outcome.degradation_idx].name;
        let case_id = &cases[outcome.case_idx].id;
        if let Some(err) = outcome.degrade_error {
            failures.push(FailureRow {
                enhancer: None,
                degradation: deg_name.clone(),
                case_id: case_id.clone(),
                error: err,
            });
            continue;
        }
        for cell in outcome.cells {
            let enh_name = &cfg.enhancers[cell.enhancer_idx].name;
            match cell.metrics {
                Ok(m) => {
                    let key = (cell.enhancer_idx, outcome.degradation_idx);
                    cell_metrics
                        .entry(key)
                        .or_default()
                        .push(MetricVector::from_case(&m));
                    for (id, t, e) in cell.pairs.hu {
                        hu_pairs.entry((key.0, key.1, id)).or_default().push((t, e));
                    }
                    for (id, t, e) in cell.pairs.size {
                        size_pairs.entry((key.0, key.1, id)).or_default().push((t, e));
                    }
                    case_rows.push(CaseRow {
                        enhancer: enh_name.clone(),
                        degradation: deg_name.clone(),
                        case_id: case_id.clone(),
                        metrics: m,
                    });
                }
                Err(err) => failures.push(FailureRow {
                    enhancer: Some(enh_name.clone()),
                    degradation: deg_name.clone(),
                    case_id: case_id.clone(),
                    error: err,
                }),
            }
        }
    }

    // Fixed assembly order: enhancer, then degradation, then case index.
    let enh_pos = |name: &str| cfg.enhancers.iter().position(|e| e.name == name);
    let deg_pos = |name: &str| cfg.degradations.iter().position(|d| d.name == name);
    let case_pos = |id: &str| cases.iter().position(|c| c.id == id);
    case_rows.sort_by_key(|r| {
        (
            enh_pos(&r.enhancer),
            deg_pos(&r.degradation),
            case_pos(&r.case_id),
        )
    });
    failures.sort_by_key(|f| {
        (
            f.enhancer.as_deref().and_then(enh_pos),
            deg_pos(&f.degradation),
            case_pos(&f.case_id),
        )
    });

    let mut aggregates = Vec::new();
    let mut cohort = Vec::new();
    for (e_idx, enh) in cfg.enhancers.iter().enumerate() {
        for (d_idx, deg) in cfg.degradations.iter().enumerate() {
            if let Some(items) = cell_metrics.get(&(e_idx, d_idx)) {
                let (mean, std) = MetricVector::aggregate(items);
                aggregates.push(AggregateRow {
                    enhancer: enh.name.clone(),
                    degradation: deg.name.clone(),
                    n_cases: items.len(),
                    mean,
                    std,
                });
            }
            let region_ids: BTreeSet<u16> = hu_pairs
                .range((e_idx, d_idx, 0)..=(e_idx, d_idx, u16::MAX))
                .map(|((_, _, id), _)| *id)
                .chain(
                    size_pairs
                        .range((e_idx, d_idx, 0)..=(e_idx, d_idx, u16::MAX))
                        .map(|((_, _, id), _)| *id),
                )
                .collect();
            for id in region_ids {
                let r_of = |pairs: Option<&Vec<(f64, f64)>>| match pairs {
                    Some(p) => match metrics::pearson_r(p) {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    },
                    None => (None, Some("region absent".to_string())),
                };
                let (r_hu, note_hu) = r_of(hu_pairs.get(&(e_idx, d_idx, id)));
                let (r_size, note_size) = r_of(size_pairs.get(&(e_idx, d_idx, id)));
                cohort.push(CohortRow {
                    enhancer: enh.name.clone(),
                    degradation: deg.name.clone(),
                    region_id: id,
                    pearson_mean_hu: r_hu,
                    pearson_voxel_count: r_size,
                    note: note_hu.or(note_size),
                });
            }
        }
    }

    let report = EvalReport {
        meta: ReportMeta::new(cfg.seed, cfg.config_hash()),
        cases: case_rows,
        aggregates,
        cohort_correlations: cohort,
        failures,
    };

    let deg_order: Vec<String> = cfg.degradations.iter().map(|d| d.name.clone()).collect();
    let enh_order: Vec<String> = cfg.enhancers.iter().map(|e| e.name.clone()).collect();
    report.write_files(&cfg.out_dir, &deg_order, &enh_order)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Leave-one-out ablation
// ---------------------------------------------------------------------------

fn default_tuning(spec: &EnhancerSpec) -> TuningGrid {
    match spec {
        EnhancerSpec::Nlm(_) => TuningGrid {
            h: vec![10.0, 20.0, 40.0, 80.0],
            lambda: vec![],
        },
        EnhancerSpec::Tv(_) => TuningGrid {
            h: vec![],
            lambda: vec![5.0, 10.0, 20.0, 40.0],
        },
        _ => TuningGrid::default(),
    }
}

/// Candidate specs spanned by an enhancer's tuning grid, with a printable
/// parameter label each. Enhancers without tunables yield themselves.
fn tuning_candidates(enh: &NamedEnhancer) -> Vec<(EnhancerSpec, String)> {
    let grid = enh
        .tuning
        .clone()
        .unwrap_or_else(|| default_tuning(&enh.spec));
    match &enh.spec {
        EnhancerSpec::Nlm(base) if !grid.h.is_empty() => grid
            .h
            .iter()
            .map(|&h| {
                let mut s = base.clone();
                s.h = h;
                (EnhancerSpec::Nlm(s), format!("h={h}"))
            })
            .collect(),
        EnhancerSpec::Tv(base) if !grid.lambda.is_empty() => grid
            .lambda
            .iter()
            .map(|&l| {
                let mut s = base.clone();
                s.lambda = l;
                (EnhancerSpec::Tv(s), format!("lambda={l}"))
            })
            .collect(),
        other => vec![(other.clone(), "-".into())],
    }
}

/// Leave-one-out ablation grid: for every degradation d, tune each
/// enhancer's parameters (grid search maximizing mean SSIM) on the other
/// degradations, then evaluate on all of them; a final "all degrades" row
/// tunes on every condition.
pub fn ablate(cfg: &PipelineConfig) -> Result<AblationReport> {
    cfg.validate()?;
    if cfg.degradations.len() < 2 {
        return Err(Error::Config(
            "ablate requires >= 2 degradations to leave one out".into(),
        ));
    }
    let cases = load_cases(cfg)?;
    let geoms: Vec<Geometry> = cases
        .iter()
        .map(|c| case_geometry(cfg, &c.volume))
        .collect::<Result<_>>()?;
    let filter = cfg.filter();
    let workers = Workers::new(cfg.threads)?;

    // Degraded volumes are shared across every row of the grid; compute
    // each (case, degradation) pair exactly once.
    let jobs: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..cfg.degradations.len()).map(move |d| (c, d)))
        .collect();
    let degraded: Vec<VolumeF32> = workers.run(|| {
        jobs.par_iter()
            .map(|&(c, d)| {
                let deg = &cfg.degradations[d];
                let stream = RngStream::root(cfg.seed)
                    .derive("case", c as u64)
                    .derive(&format!("degrade/{}", deg.name), d as u64);
                degrade::apply(&cases[c].volume, &deg.spec, &geoms[c], &filter, &stream)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let degraded_at = |c: usize, d: usize| &degraded[c * cfg.degradations.len() + d];

    let n_degs = cfg.degradations.len();
    let all_degs: Vec<usize> = (0..n_degs).collect();
    let mut rows = Vec::new();
    for enh in &cfg.enhancers {
        let candidates = tuning_candidates(enh);
        // Score every candidate once per degradation (the leave-one-out
        // conditions reuse these; enhancers are deterministic).
        let scores: Vec<Vec<(f64, f64)>> = workers.run(|| {
            candidates
                .par_iter()
                .map(|(spec, _)| {
                    all_degs
                        .iter()
                        .map(|&d| {
                            let mut ssim_sum = 0.0;
                            let mut psnr_sum = 0.0;
                            for c in 0..cases.len() {
                                let enhanced =
                                    enhance::apply(degraded_at(c, d), spec, &geoms[c], None)?;
                                ssim_sum += metrics::ssim(
                                    &enhanced,
                                    &cases[c].volume,
                                    &metrics::SsimParams::default(),
                                )?;
                                psnr_sum += metrics::psnr(
                                    &enhanced,
                                    &cases[c].volume,
                                    metrics::DATA_RANGE,
                                )?;
                            }
                            let n = cases.len() as f64;
                            Ok((ssim_sum / n, psnr_sum / n))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let mut conditions: Vec<(String, Option<String>, Vec<usize>)> = cfg
            .degradations
            .iter()
            .enumerate()
            .map(|(d, deg)| {
                (
                    format!("w/o. {}", deg.name),
                    Some(deg.name.clone()),
                    all_degs.iter().copied().filter(|&x| x != d).collect(),
                )
            })
            .collect();
        conditions.push(("all degrades".into(), None, all_degs.clone()));

        for (label, excluded, tune_set) in conditions {
            let mut best = 0usize;
            let mut best_ssim = f64::NEG_INFINITY;
            for (ci, per_deg) in scores.iter().enumerate() {
                let mean_ssim = tune_set.iter().map(|&d| per_deg[d].0).sum::<f64>()
                    / tune_set.len() as f64;
                if mean_ssim > best_ssim {
                    best_ssim = mean_ssim;
                    best = ci;
                }
            }
            let cells = all_degs
                .iter()
                .map(|&d| AblationCell {
                    degradation: cfg.degradations[d].name.clone(),
                    ssim: scores[best][d].0,
                    psnr_db: scores[best][d].1,
                })
                .collect();
            rows.push(AblationRow {
                label,
                enhancer: enh.name.clone(),
                excluded,
                tuned_params: candidates[best].1.clone(),
                cells,
            });
        }
    }

    let report = AblationReport {
        meta: ReportMeta::new(cfg.seed, cfg.config_hash()),
        rows,
    };
    let deg_order: Vec<String> = cfg.degradations.iter().map(|d| d.name.clone()).collect();
    report.write_files(&cfg.out_dir, &deg_order)?;
    Ok(report)
}
