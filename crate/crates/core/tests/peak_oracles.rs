use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rbc_core::rayscan::{MProjection, RayConfig};
use rbc_core::seed;
use rbc_core::sigproc::{critical_features, find_peaks, projection_stats, quality_check, robust_stats, PeakConfig, QualityConfig};

const M: usize = 6;
const L: usize = 60;

fn projection(samples: Vec<Vec<f64>>) -> MProjection {
    MProjection::from_samples([0.0; 3], RayConfig { m: M, l_px: L, px_mv: 0.5 }, samples).unwrap()
}

fn gaussian_rays(rng: &mut impl Rng, sigma: f64) -> Vec<Vec<f64>> {
    (0..M).map(|_| (0..L).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

#[test]
fn mad_estimates_unit_gaussian() {
    for s in 0..5 {
        let mut rng = seed::rng(s, "mad", 0);
        let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let sigma = robust_stats(&x).sigma;
        assert!((0.95..=1.05).contains(&sigma), "seed {s}: {sigma}");
    }
}

#[test]
fn pure_noise_fails_quality_gate() {
    let mut rng = seed::rng(3, "quality", 0);
    let cfg = QualityConfig::default();
    let passed = (0..1000).filter(|_| quality_check(&projection(gaussian_rays(&mut rng, 1.0)), &cfg)).count();
    // expected max of 360 draws sits near 3σ; crossing 4σ is a ~1% event
    assert!(passed <= 30, "{passed} of 1000 noise projections passed");
}

#[test]
fn ridge_passes_quality_gate() {
    let mut rng = seed::rng(4, "quality", 0);
    for _ in 0..100 {
        let mut rays = gaussian_rays(&mut rng, 1.0);
        let k = rng.random_range(0..M);
        let c = rng.random_range(5..55);
        rays[k][c] += 10.0;
        assert!(quality_check(&projection(rays), &QualityConfig::default()));
    }
}

/// Planted peaks at 1-based pixels, at least 8 px apart and off the ends.
fn plant(rng: &mut impl Rng) -> Vec<usize> {
    let n = rng.random_range(0..=3);
    let mut out: Vec<usize> = Vec::new();
    while out.len() < n {
        let c = rng.random_range(4..=L - 3);
        if out.iter().all(|&p| p.abs_diff(c) >= 8) {
            out.push(c);
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn planted_peaks_are_recovered_exactly() {
    // bounded noise: a 3σ gate would flag ~0.1% of Gaussian samples by itself,
    // which makes "no spurious peaks" a statement about the noise, not the detector
    let half_width = 1.0;
    let sigma_noise = 0.7413 * half_width; // 1.4826 × MAD of U(-a, a)
    let (mut misses, mut spurious, mut planted_total) = (0, 0, 0);
    for f in 0..100u64 {
        let mut rng = seed::rng(f, "fixture", 0);
        let truth: Vec<Vec<usize>> = (0..M).map(|_| plant(&mut rng)).collect();
        let rays: Vec<Vec<f64>> = truth
            .iter()
            .map(|centers| {
                (1..=L)
                    .map(|x| {
                        let bumps: f64 = centers
                            .iter()
                            .map(|&c| 10.0 * sigma_noise * (-0.5 * (x as f64 - c as f64).powi(2)).exp())
                            .sum();
                        bumps + rng.random_range(-half_width..half_width)
                    })
                    .collect()
            })
            .collect();
        let proj = projection(rays);
        let stats = projection_stats(&proj);
        for (ray, want) in proj.samples.iter().zip(&truth) {
            let got = find_peaks(ray, stats.sigma, stats.median, &PeakConfig::default());
            planted_total += want.len();
            misses += want.iter().filter(|c| !got.contains(c)).count();
            spurious += got.iter().filter(|g| !want.contains(g)).count();
        }
        let cfv = critical_features(&proj, &PeakConfig::default());
        for (k, want) in truth.iter().enumerate() {
            assert_eq!(cfv.values[k], want.first().map(|&c| c as u32), "fixture {f} ray {k}");
        }
    }
    assert!(planted_total > 300);
    assert_eq!((misses, spurious), (0, 0), "over {planted_total} planted peaks");
}

#[test]
fn planted_peaks_survive_gaussian_noise() {
    // with Gaussian noise nothing planted is lost; stray noise maxima are possible
    let mut misses = 0;
    for f in 0..100u64 {
        let mut rng = seed::rng(f, "gauss-fixture", 0);
        let truth: Vec<Vec<usize>> = (0..M).map(|_| plant(&mut rng)).collect();
        let mut rays = gaussian_rays(&mut rng, 1.0);
        for (ray, centers) in rays.iter_mut().zip(&truth) {
            for (i, v) in ray.iter_mut().enumerate() {
                *v += centers.iter().map(|&c| 10.0 * (-0.5 * ((i + 1) as f64 - c as f64).powi(2)).exp()).sum::<f64>();
            }
        }
        let proj = projection(rays);
        let stats = projection_stats(&proj);
        for (ray, want) in proj.samples.iter().zip(&truth) {
            let got = find_peaks(ray, stats.sigma, stats.median, &PeakConfig::default());
            misses += want.iter().filter(|&&c| !got.iter().any(|&g| g.abs_diff(c) <= 1)).count();
        }
    }
    assert_eq!(misses, 0);
}

fn rays_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, L), M).prop_flat_map(|noise| {
        proptest::collection::vec((0..L, 2.0f64..12.0), 0..8).prop_map(move |bumps| {
            let mut rays = noise.clone();
            for (j, (c, a)) in bumps.into_iter().enumerate() {
                rays[j % M][c] += a;
            }
            rays
        })
    })
}

proptest! {
    #[test]
    fn features_ignore_offset_and_gain(rays in rays_strategy(), offset in -50.0f64..50.0, gain in 0.05f64..20.0) {
        let cfg = PeakConfig::default();
        let base = critical_features(&projection(rays.clone()), &cfg);
        let moved: Vec<Vec<f64>> = rays.iter().map(|r| r.iter().map(|x| gain * x + offset).collect()).collect();
        prop_assert_eq!(base, critical_features(&projection(moved), &cfg));
    }

    #[test]
    fn reported_peaks_pass_both_gates(rays in rays_strategy()) {
        let cfg = PeakConfig::default();
        let proj = projection(rays);
        let s = projection_stats(&proj);
        for ray in &proj.samples {
            let peaks = find_peaks(ray, s.sigma, s.median, &cfg);
            for &p in &peaks {
                let i = p - 1;
                prop_assert!(ray[i] >= s.median + cfg.height_k * s.sigma);
                prop_assert!(rbc_core::sigproc::prominence(ray, i) >= cfg.prom_k * s.sigma);
            }
            prop_assert!(peaks.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
