//! `ctdistill` — CT degradation-to-enhancement benchmark CLI.
//!
//! Exit codes: 0 success, 1 runtime error, 2 config error, 3 run finished
//! with per-case failures recorded in the report.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ctdistill_core::degrade::{
    ConventionalSpec, DegradeSpec, LowDoseMode, LowDoseSpec, SparseViewSpec,
};
use ctdistill_core::enhance::{EnhancerSpec, ExternalSpec, NlmSpec, SirtSpec, TvSpec};
use ctdistill_core::harness::{self, PipelineConfig};
use ctdistill_core::io;
use ctdistill_core::phantom;
use ctdistill_core::projector::{fbp, sinogram_stack, FbpFilter, FilterKind};
use ctdistill_core::rng::RngStream;
use ctdistill_core::{Error as CoreError, Geometry};

#[derive(Parser)]
#[command(name = "ctdistill", version, about = "CT degradation-to-enhancement benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom volume (and labels for the lung kind).
    Phantom(PhantomArgs),
    /// Forward-project a volume into a sinogram stack.
    Project(ProjectArgs),
    /// Reconstruct a sinogram stack with filtered back-projection.
    Fbp(FbpArgs),
    /// Apply a degradation transform to a volume.
    Degrade(DegradeArgs),
    /// Apply an enhancement operator to a volume.
    Enhance(EnhanceArgs),
    /// Run a degrade -> enhance -> evaluate cohort pipeline from a JSON config.
    Pipeline(ConfigArgs),
    /// Run the leave-one-out ablation grid from a JSON config.
    Ablate(ConfigArgs),
    /// Histogram a metric from a saved report.json.
    Hist(HistArgs),
    /// Import a raw int16 little-endian HU volume with a JSON sidecar.
    Import(ImportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PhantomKindArg {
    SheppLogan,
    Lung,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_enum)]
    kind: PhantomKindArg,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the label map (lung kind only).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    n_vessels: Option<usize>,
    #[arg(long)]
    airway_depth: Option<usize>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 720)]
    angles: usize,
    #[arg(long, default_value_t = 0.019)]
    mu_water: f64,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FilterArg {
    Ramlak,
    Hann,
}

impl FilterArg {
    fn to_filter(self, cutoff: f64) -> FbpFilter {
        FbpFilter {
            kind: match self {
                FilterArg::Ramlak => FilterKind::RamLak,
                FilterArg::Hann => FilterKind::Hann,
            },
            cutoff,
        }
    }
}

#[derive(Args)]
struct FbpArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "ramlak")]
    filter: FilterArg,
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Reconstruction grid side; defaults to floor(n_bins / sqrt(2)).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.019)]
    mu_water: f64,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum DegradeKindArg {
    SparseView,
    LowDose,
    Conventional,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum DoseModeArg {
    Paper,
    Transmission,
}

#[derive(Args)]
struct DegradeArgs {
    /// One of the atomic kinds; use --spec-json (or the pipeline config)
    /// for mixed compositions.
    #[arg(long, value_enum, required_unless_present = "spec_json")]
    kind: Option<DegradeKindArg>,
    /// Full DegradeSpec as JSON, overriding --kind.
    #[arg(long)]
    spec_json: Option<String>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 720)]
    angles: usize,
    #[arg(long, value_enum, default_value = "ramlak")]
    filter: FilterArg,
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Sparse-view stride.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Low-dose factor.
    #[arg(long, default_value_t = 50.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "paper")]
    mode: DoseModeArg,
    #[arg(long, default_value_t = 1.0e5)]
    i0: f64,
    /// Conventional downsampling factor.
    #[arg(long, default_value_t = 2)]
    scale: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_gauss: f64,
    #[arg(long, default_value_t = 10.0)]
    photon_scale: f64,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EnhanceKindArg {
    Identity,
    Nlm,
    Tv,
    Sirt,
    External,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long, value_enum)]
    kind: EnhanceKindArg,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 45.0)]
    h: f64,
    #[arg(long, default_value_t = 2)]
    patch_radius: usize,
    #[arg(long, default_value_t = 5)]
    search_radius: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 20.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 50)]
    sirt_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    relaxation: f64,
    /// Projection count for SIRT's re-projection.
    #[arg(long, default_value_t = 720)]
    angles: usize,
    /// External command template with {in} and {out} placeholders.
    #[arg(long)]
    command: Option<String>,
    /// Exchange directory for external enhancers.
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct HistArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "ssim")]
    metric: String,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Output directory; defaults to the report's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err
                .downcast_ref::<CoreError>()
                .is_some_and(|e| matches!(e, CoreError::Config(_)))
            {
                2
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Phantom(args) => cmd_phantom(args)?,
        Command::Project(args) => cmd_project(args)?,
        Command::Fbp(args) => cmd_fbp(args)?,
        Command::Degrade(args) => cmd_degrade(args)?,
        Command::Enhance(args) => cmd_enhance(args)?,
        Command::Pipeline(args) => {
            let cfg = PipelineConfig::from_file(&args.config)?;
            let report = harness::run_pipeline(&cfg)?;
            println!(
                "{}",
                report.to_table(
                    &cfg.degradations.iter().map(|d| d.name.clone()).collect::<Vec<_>>(),
                    &cfg.enhancers.iter().map(|e| e.name.clone()).collect::<Vec<_>>(),
                )
            );
            println!(
                "report: {} cases, {} failures -> {}",
                report.cases.len(),
                report.failures.len(),
                cfg.out_dir.display()
            );
            if !report.failures.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Ablate(args) => {
            let cfg = PipelineConfig::from_file(&args.config)?;
            let grid = harness::ablate(&cfg)?;
            let order: Vec<String> = cfg.degradations.iter().map(|d| d.name.clone()).collect();
            println!("{}", grid.to_table(&order));
            println!("grid: {} rows -> {}", grid.rows.len(), cfg.out_dir.display());
        }
        Command::Hist(args) => {
            let text = std::fs::read_to_string(&args.report)
                .with_context(|| format!("reading {}", args.report.display()))?;
            let report: harness::EvalReport =
                serde_json::from_str(&text).context("parsing report")?;
            let table = harness::score_histogram(&report, &args.metric, args.bins)?;
            let out_dir = args.out_dir.unwrap_or_else(|| {
                args.report
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            table.write_files(&out_dir)?;
            for g in &table.groups {
                println!(
                    "{}/{}: n={} mean_bin={:.2} counts={:?}",
                    g.enhancer, g.degradation, g.n, g.mean_bin_index, g.counts
                );
            }
        }
        Command::Import(args) => {
            let meta_text = std::fs::read_to_string(&args.meta)
                .with_context(|| format!("reading {}", args.meta.display()))?;
            let meta: io::RawMeta = serde_json::from_str(&meta_text).context("parsing meta")?;
            let v = io::import_raw_i16(&args.raw, &meta)?;
            io::write_volume(&v, &args.out)?;
            println!("imported {:?} -> {}", v.dims, args.out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_phantom(args: PhantomArgs) -> Result<()> {
    match args.kind {
        PhantomKindArg::SheppLogan => {
            let v = phantom::shepp_logan(args.n)?;
            io::write_volume(&v, &args.out)?;
            if args.labels.is_some() {
                bail!("shepp_logan has no label map; omit --labels");
            }
        }
        PhantomKindArg::Lung => {
            let mut spec = phantom::LungSpec::new(args.n, args.seed);
            if let Some(v) = args.n_vessels {
                spec.n_vessels = v;
            }
            if let Some(d) = args.airway_depth {
                spec.airway_depth = d;
            }
            let (v, labels) = phantom::lung_phantom(&spec)?;
            io::write_volume(&v, &args.out)?;
            if let Some(path) = &args.labels {
                io::write_labels(&labels, path, io::Dtype::U8Labels)?;
            }
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_project(args: ProjectArgs) -> Result<()> {
    let v = io::read_volume_hu(&args.input)?;
    let mut geom = Geometry::for_volume(&v, args.angles)?;
    geom.mu_water = args.mu_water;
    let geom = geom.validated()?;
    let sinos = sinogram_stack(&v, &geom)?;
    io::write_sinograms(&sinos, &args.out)?;
    println!(
        "projected {} slices x {} angles x {} bins -> {}",
        sinos.len(),
        geom.n_angles,
        geom.n_bins,
        args.out.display()
    );
    Ok(())
}

fn cmd_fbp(args: FbpArgs) -> Result<()> {
    let sinos = io::read_sinograms(&args.input)?;
    let first = sinos.first().context("empty sinogram stack")?;
    let n = args
        .n
        .unwrap_or_else(|| (first.n_bins as f64 / std::f64::consts::SQRT_2).floor() as usize);
    let geom = Geometry {
        image_n: n,
        pixel_size: first.bin_spacing,
        n_angles: first.n_angles(),
        n_bins: first.n_bins,
        bin_spacing: first.bin_spacing,
        mu_water: args.mu_water,
    }
    .validated()?;
    let filter = args.filter.to_filter(args.cutoff);
    let mut out: Option<ctdistill_core::VolumeF32> = None;
    for (z, s) in sinos.iter().enumerate() {
        let slice = fbp(s, &filter, &geom)?;
        let vol = out.get_or_insert_with(|| {
            ctdistill_core::VolumeF32::filled(
                (n, n, sinos.len()),
                (geom.pixel_size, geom.pixel_size, 1.0),
                0.0,
            )
        });
        vol.slice_mut(z).copy_from_slice(slice.slice(0));
    }
    let vol = out.context("no slices reconstructed")?;
    io::write_volume(&vol, &args.out)?;
    println!("reconstructed {n}x{n}x{} -> {}", sinos.len(), args.out.display());
    Ok(())
}

fn cmd_degrade(args: DegradeArgs) -> Result<()> {
    let spec: DegradeSpec = match &args.spec_json {
        Some(json) => serde_json::from_str(json).context("parsing --spec-json")?,
        None => match args.kind.expect("clap enforces kind or spec-json") {
            DegradeKindArg::SparseView => DegradeSpec::SparseView(SparseViewSpec { k: args.k }),
            DegradeKindArg::LowDose => DegradeSpec::LowDose(LowDoseSpec {
                alpha: args.alpha,
                mode: match args.mode {
                    DoseModeArg::Paper => LowDoseMode::Paper,
                    DoseModeArg::Transmission => LowDoseMode::Transmission,
                },
                i0: args.i0,
            }),
            DegradeKindArg::Conventional => DegradeSpec::Conventional(ConventionalSpec {
                scale: args.scale,
                sigma_gauss: args.sigma_gauss,
                photon_scale: args.photon_scale,
            }),
        },
    };
    let x = io::read_volume_hu(&args.input)?;
    let geom = Geometry::for_volume(&x, args.angles)?;
    let filter = args.filter.to_filter(args.cutoff);
    let stream = RngStream::root(args.seed);
    let y = ctdistill_core::degrade::apply(&x, &spec, &geom, &filter, &stream)?;
    io::write_volume(&y, &args.out)?;
    println!("degraded ({}) -> {}", spec.kind_name(), args.out.display());
    Ok(())
}

fn cmd_enhance(args: EnhanceArgs) -> Result<()> {
    let spec = match args.kind {
        EnhanceKindArg::Identity => EnhancerSpec::Identity,
        EnhanceKindArg::Nlm => EnhancerSpec::Nlm(NlmSpec {
            patch_radius: args.patch_radius,
            search_radius: args.search_radius,
            h: args.h,
            sigma: args.sigma,
        }),
        EnhanceKindArg::Tv => EnhancerSpec::Tv(TvSpec {
            lambda: args.lambda,
            iters: args.iters,
        }),
        EnhanceKindArg::Sirt => EnhancerSpec::Sirt(SirtSpec {
            iters: args.sirt_iters,
            relaxation: args.relaxation,
        }),
        EnhanceKindArg::External => EnhancerSpec::External(ExternalSpec {
            command: args
                .command
                .clone()
                .context("--command required for external enhancer")?,
        }),
    };
    let x = io::read_volume_hu(&args.input)?;
    let geom = Geometry::for_volume(&x, args.angles)?;
    let workdir = match (&spec, &args.workdir) {
        (EnhancerSpec::External(_), Some(dir)) => Some(dir.clone()),
        (EnhancerSpec::External(_), None) => {
            Some(std::env::temp_dir().join(format!("ctdistill-exchange-{}", std::process::id())))
        }
        _ => None,
    };
    let y = ctdistill_core::enhance::apply(&x, &spec, &geom, workdir.as_deref())?;
    io::write_volume(&y, &args.out)?;
    println!("enhanced ({}) -> {}", spec.kind_name(), args.out.display());
    Ok(())
}
