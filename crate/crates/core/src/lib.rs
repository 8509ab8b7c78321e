//! Tomographic degradation-to-enhancement benchmark toolkit.
//!
//! This crate simulates the acquisition physics that separate high-quality CT
//! from routine clinical scans, and measures how well an enhancement operator
//! undoes the damage. The pieces compose into a deterministic pipeline:
//!
//! 1. [`phantom`] — synthetic ground-truth slices with aligned label maps;
//! 2. [`projector`] — parallel-beam Radon transform, its matched adjoint, and
//!    filtered back-projection;
//! 3. [`degrade`] — sparse-view, low-dose (Poisson), and conventional
//!    (downsample + noise) degradations, plus ordered/random mixes;
//! 4. [`enhance`] — classical baselines (NLM, TV, SIRT) and a file-exchange
//!    adapter for external enhancers;
//! 5. [`metrics`] — SSIM, PSNR, pixel-wise and per-region HU consistency,
//!    mask agreement, and cohort Pearson correlation;
//! 6. [`harness`] — cohort orchestration, leave-one-out ablation grids, and
//!    score histograms, emitted as CSV/JSON/SVG reports.
//!
//! Every operation is a pure function of its inputs and an explicit
//! [`rng::RngStream`]; two runs with the same seed and config produce
//! byte-identical output files.

pub mod degrade;
pub mod enhance;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod rng;
pub mod sinogram;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::Geometry;
pub use rng::RngStream;
pub use sinogram::Sinogram;
pub use volume::{LabelMap, MuVolume, VolumeF32, HU_MAX, HU_MIN};
