use ctdistill_core::degrade::*;
use ctdistill_core::metrics;
use ctdistill_core::phantom::{lung_phantom, LungSpec};
use ctdistill_core::projector::FbpFilter;
use ctdistill_core::rng::RngStream;
use ctdistill_core::Geometry;

fn main() {
    let (x, _) = lung_phantom(&LungSpec::new(256, 3)).unwrap();
    let psnr = |v: &ctdistill_core::VolumeF32| metrics::psnr(v, &x, metrics::DATA_RANGE).unwrap();
    for angles in [240usize, 720] {
        let g = Geometry::for_volume(&x, angles).unwrap();
        let f = FbpFilter::default();
        let ld = LowDoseSpec { alpha: 2000.0, mode: LowDoseMode::Paper, i0: 1.0e5 };
        for (scale, sigma, ps) in [(2usize, 0.0f64, 1.0e6f64), (2, 20.0, 10.0), (4, 40.0, 10.0), (4, 20.0, 10.0), (3, 30.0, 10.0)] {
            let conv = ConventionalSpec { scale, sigma_gauss: sigma, photon_scale: ps };
            let stream = RngStream::root(17);
            let a_ld = degrade_low_dose(&x, &ld, &g, &f, &stream).unwrap();
            let a_cv = degrade_conventional(&x, &conv, &stream).unwrap();
            let mixed = degrade_mixed(&x, &MixedSpec {
                stages: vec![DegradeSpec::LowDose(ld.clone()), DegradeSpec::Conventional(conv.clone())],
                mode: MixMode::Sequential,
            }, &g, &f, &stream).unwrap();
            println!("angles={angles} s={scale} sig={sigma} ps={ps}: ld={:.2} conv={:.2} mixed={:.2} ok={}",
                psnr(&a_ld), psnr(&a_cv), psnr(&mixed), psnr(&mixed) <= psnr(&a_ld).min(psnr(&a_cv)));
        }
    }
    // TV equivariance deviation profile
    use ctdistill_core::enhance::{enhance_tv, TvSpec};
    let n = 48usize;
    let (base, _) = lung_phantom(&LungSpec::new(n, 6)).unwrap();
    let mut shifted = base.clone();
    for y in 0..n { for xx in (1..n).rev() { shifted.data[y*n+xx] = base.data[y*n+xx-1]; } }
    let spec = TvSpec { lambda: 15.0, iters: 80 };
    let ob = enhance_tv(&base, &spec).unwrap();
    let os = enhance_tv(&shifted, &spec).unwrap();
    for band in [2usize, 4, 6, 8] {
        let mut worst = 0.0f32;
        for y in band..n-band { for xx in band+1..n-band {
            worst = worst.max((os.data[y*n+xx] - ob.data[y*n+xx-1]).abs());
        }}
        println!("TV band={band}: worst dev {worst:.4}");
    }
}
