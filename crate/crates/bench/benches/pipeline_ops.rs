//! Benchmarks for the operations that dominate pipeline runtime: forward
//! projection, FBP, the degradations, NLM, and SSIM.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ctdistill_core::degrade::{
    degrade_conventional, degrade_low_dose, ConventionalSpec, LowDoseMode, LowDoseSpec,
};
use ctdistill_core::enhance::{enhance_nlm, NlmSpec};
use ctdistill_core::metrics::{ssim, SsimParams};
use ctdistill_core::phantom::{lung_phantom, shepp_logan, LungSpec};
use ctdistill_core::projector::{fbp, sinogram_of, FbpFilter};
use ctdistill_core::rng::RngStream;
use ctdistill_core::{Geometry, VolumeF32};

fn mu_slice(v: &VolumeF32, geom: &Geometry) -> Vec<f64> {
    v.slice(0)
        .iter()
        .map(|&hu| (geom.mu_water * (1.0 + hu as f64 / 1000.0)).max(0.0))
        .collect()
}

fn bench_projector(c: &mut Criterion) {
    let mut group = c.benchmark_group("projector");
    group.sample_size(10);
    for &n in &[128usize, 256] {
        let x = shepp_logan(n).unwrap();
        let geom = Geometry::for_volume(&x, 360).unwrap();
        let mu = mu_slice(&x, &geom);
        group.bench_with_input(BenchmarkId::new("radon_forward", n), &n, |b, _| {
            b.iter(|| {
                black_box(
                    ctdistill_core::projector::radon_forward(black_box(&mu), &geom).unwrap(),
                )
            })
        });
        let sino = sinogram_of(&x, 0, &geom).unwrap();
        group.bench_with_input(BenchmarkId::new("fbp", n), &n, |b, _| {
            b.iter(|| black_box(fbp(black_box(&sino), &FbpFilter::default(), &geom).unwrap()))
        });
    }
    group.finish();
}

fn bench_degradations(c: &mut Criterion) {
    let mut group = c.benchmark_group("degrade");
    group.sample_size(10);
    let (x, _) = lung_phantom(&LungSpec::new(256, 1)).unwrap();
    let geom = Geometry::for_volume(&x, 360).unwrap();
    let stream = RngStream::root(9);
    group.bench_function("low_dose_256", |b| {
        let spec = LowDoseSpec {
            alpha: 50.0,
            mode: LowDoseMode::Paper,
            i0: 1.0e5,
        };
        b.iter(|| {
            black_box(
                degrade_low_dose(black_box(&x), &spec, &geom, &FbpFilter::default(), &stream)
                    .unwrap(),
            )
        })
    });
    group.bench_function("conventional_256", |b| {
        let spec = ConventionalSpec {
            scale: 2,
            sigma_gauss: 20.0,
            photon_scale: 10.0,
        };
        b.iter(|| black_box(degrade_conventional(black_box(&x), &spec, &stream).unwrap()))
    });
    group.finish();
}

fn bench_enhance_and_metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("enhance_metrics");
    group.sample_size(10);
    let (truth, _) = lung_phantom(&LungSpec::new(256, 2)).unwrap();
    let noisy = degrade_conventional(
        &truth,
        &ConventionalSpec {
            scale: 1,
            sigma_gauss: 30.0,
            photon_scale: 1.0e9,
        },
        &RngStream::root(3),
    )
    .unwrap();
    group.bench_function("nlm_256", |b| {
        b.iter(|| black_box(enhance_nlm(black_box(&noisy), &NlmSpec::default()).unwrap()))
    });
    group.bench_function("ssim_256", |b| {
        b.iter(|| {
            black_box(ssim(black_box(&noisy), &truth, &SsimParams::default()).unwrap())
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_projector,
    bench_degradations,
    bench_enhance_and_metrics
);
criterion_main!(benches);
