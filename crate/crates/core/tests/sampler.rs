mod common;

use common::*;
use lemnis::droplet::{in_droplet, DropletSpec};
use lemnis::kernels::KernelHandle;
use lemnis::sampler::*;
use lemnis::{Complex64, EnsembleParams, Error};

fn hat(a: f64, c: f64, n: usize) -> KernelHandle {
    KernelHandle::hat(&EnsembleParams::new(a, c, n).unwrap()).unwrap()
}

#[test]
fn same_seed_same_points() {
    let h = hat(0.5, 1.0, 12);
    let r = default_region(&h);
    let a = sample_projection_dpp(&h, 42, r).unwrap();
    let b = sample_projection_dpp(&h, 42, r).unwrap();
    let c = sample_projection_dpp(&h, 43, r).unwrap();
    assert_eq!(a.points, b.points);
    assert_ne!(a.points, c.points);
    assert_eq!(a.acceptance_stats, b.acceptance_stats);
}

#[test]
fn run_has_n_points_inside_region() {
    let h = hat(0.3, 0.5, 20);
    let r = default_region(&h);
    let run = sample_projection_dpp(&h, 1, r).unwrap();
    assert_eq!(run.points.len(), 20);
    assert!(run.points.iter().all(|z| r.contains(*z)));
    assert_eq!(run.acceptance_stats.accepted, 20);
    assert!(run.acceptance_stats.proposals >= 20);
}

#[test]
fn small_region_is_rejected() {
    let h = hat(0.5, 0.0, 10);
    let r = Region { center: Complex64::new(0.5, 0.0), radius: 1.1 };
    assert!(matches!(sample_projection_dpp(&h, 0, r), Err(Error::InvalidParam(_))));
}

#[test]
fn single_point_is_gaussian() {
    // N = 1, a = c = 0: |ζ|² ~ Exp(1)
    let h = hat(0.0, 0.0, 1);
    let r = default_region(&h);
    let seeds: Vec<u64> = (0..2000).collect();
    let runs = sample_many(&h, &seeds, r).unwrap();
    let m: f64 = runs.iter().map(|x| x.points[0].norm_sqr()).sum::<f64>() / seeds.len() as f64;
    // standard error 1/√2000 ≈ 0.022; truncation of the region is below 1e−10
    assert!((m - 1.0).abs() < 0.1, "{m}");
}

#[test]
fn ginibre_cloud_fills_disc() {
    let h = hat(0.7, 0.0, 200);
    let run = sample_projection_dpp(&h, 2024, default_region(&h)).unwrap();
    let spec = DropletSpec::new(1, 0.7).unwrap();
    let inside = run.points.iter().filter(|z| in_droplet(&spec, **z)).count();
    assert!(inside as f64 / 200.0 >= 0.97, "{inside}");
}

#[test]
fn histogram_mass_is_n() {
    let h = hat(0.5, 1.0, 30);
    let run = sample_projection_dpp(&h, 5, default_region(&h)).unwrap();
    let prof = empirical_histogram(&run, 17).unwrap();
    let cell = (2.0 * run.region.radius / 17.0).powi(2);
    let mass: f64 = prof.values.iter().sum::<f64>() * cell;
    assert!((mass - 30.0).abs() < 1e-10);
}

#[test]
fn radial_sampler_moments() {
    // E Σ|ζ_j|² = Σ_j (j+c+1)/N, Var = Σ_j (j+c+1)/N²
    let (c, n) = (0.5, 40);
    let mean: f64 = (0..n).map(|j| (j as f64 + c + 1.0) / n as f64).sum();
    let var: f64 = (0..n).map(|j| (j as f64 + c + 1.0) / (n * n) as f64).sum();
    let k = 400;
    let avg = (0..k)
        .map(|s| sample_radial(c, n, 1, s).unwrap().points.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / k as f64;
    assert!((avg - mean).abs() < 5.0 * (var / k as f64).sqrt(), "{avg} vs {mean}");
}

#[test]
fn radial_edge_near_unit_circle() {
    let run = sample_radial(0.0, 500, 1, 9).unwrap();
    let rmax = run.points.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    assert!((rmax - 1.0).abs() < 0.15, "{rmax}");
}

#[test]
fn radial_lemniscate_is_root_of_parent() {
    // N|ζ|^{2d} for d = 2 has the law of the parent moduli with charges (k+c+1)/2 − 1
    let (c, n) = (1.0, 30);
    let seeds = 0..200u64;
    let child: Vec<f64> = seeds
        .clone()
        .flat_map(|s| sample_radial(c, n, 2, s).unwrap().points)
        .map(|z| n as f64 * z.norm().powi(4))
        .collect();
    assert_eq!(child.len(), 200 * 60);
    // shapes (k+c+1)/2 for k < 60: mean Σ shape / 60
    let want: f64 = (0..60).map(|k| (k as f64 + c + 1.0) / 2.0).sum::<f64>() / 60.0;
    let got = child.iter().sum::<f64>() / child.len() as f64;
    assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    let run = sample_radial(c, n, 2, 3).unwrap();
    assert_eq!(run.params.d, 2);
    assert!(run.points.iter().all(|z| run.region.contains(*z)));
}

#[test]
fn order_carries_no_information() {
    // the sequential output is exchangeable: first and last points share a law
    let h = hat(0.4, 0.5, 8);
    let r = default_region(&h);
    let seeds: Vec<u64> = (100..500).collect();
    let runs = sample_many(&h, &seeds, r).unwrap();
    let first: Vec<f64> = runs.iter().map(|x| (x.points[0] - 0.4).norm()).collect();
    let last: Vec<f64> = runs.iter().map(|x| (x.points[7] - 0.4).norm()).collect();
    let (_, p) = ks_two_sample(&first, &last);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn radial_and_projection_moduli_agree() {
    let (c, n) = (0.5, 30);
    let h = hat(0.0, c, n);
    let r = default_region(&h);
    let seeds: Vec<u64> = (0..200).collect();
    let dpp: Vec<f64> = sample_many(&h, &seeds, r)
        .unwrap()
        .iter()
        .flat_map(|x| x.points.iter().map(|z| z.norm()).collect::<Vec<_>>())
        .collect();
    let rad: Vec<f64> =
        seeds.iter().flat_map(|s| sample_radial(c, n, 1, 10_000 + s).unwrap().points).map(|z| z.norm()).collect();
    let (d, p) = ks_two_sample(&dpp, &rad);
    assert!(p > 0.001, "D = {d}, p = {p}");
}

#[test]
fn empirical_intensity_matches_kernel() {
    let (a, c, n) = (0.5, 1.0, 50);
    let h = hat(a, c, n);
    let r = default_region(&h);
    let seeds: Vec<u64> = (0..50).collect();
    let runs = sample_many(&h, &seeds, r).unwrap();
    let bins = 10;
    let mut observed = vec![0.0; bins * bins];
    for run in &runs {
        let prof = empirical_histogram(run, bins).unwrap();
        let cell = (2.0 * r.radius / bins as f64).powi(2);
        for (o, v) in observed.iter_mut().zip(&prof.values) {
            *o += v * cell;
        }
    }
    // expected counts: 4×4 Gauss–Legendre per cell of K(ζ,ζ)/π, restricted to the region
    let (gx, gw) = legendre_rule(4);
    let hcell = 2.0 * r.radius / bins as f64;
    let (x0, y0) = (r.center.re - r.radius, r.center.im - r.radius);
    let mut expected = vec![0.0; bins * bins];
    for j in 0..bins {
        for i in 0..bins {
            let mut acc = 0.0;
            for (xa, wa) in gx.iter().zip(&gw) {
                for (xb, wb) in gx.iter().zip(&gw) {
                    let z = Complex64::new(
                        x0 + (i as f64 + 0.5 + 0.5 * xa) * hcell,
                        y0 + (j as f64 + 0.5 + 0.5 * xb) * hcell,
                    );
                    if r.contains(z) {
                        acc += wa * wb * h.density(z).unwrap();
                    }
                }
            }
            expected[j * bins + i] = acc * hcell * hcell / 4.0 / std::f64::consts::PI * runs.len() as f64;
        }
    }
    let total: f64 = expected.iter().sum();
    assert!((total - 2500.0).abs() < 25.0, "expected total {total}");
    let (stat, cells, p) = chi_square_p(&observed, &expected, 5.0);
    assert!(p > 0.001, "chi2 = {stat} over {cells} cells, p = {p}");
}

#[test]
fn circular_law_on_interior_annuli() {
    // a = c = 0, N = 100, 100 seeds: 10⁴ points; annuli inside r ≤ 0.8 hold
    // a fraction r2² − r1² of each sample up to exponentially small corrections
    let h = hat(0.0, 0.0, 100);
    let r = default_region(&h);
    let seeds: Vec<u64> = (0..100).collect();
    let runs = sample_many(&h, &seeds, r).unwrap();
    let total = (runs.len() * 100) as f64;
    let edges = [0.0, 0.2, 0.4, 0.6, 0.8];
    for w in edges.windows(2) {
        let count =
            runs.iter().flat_map(|x| x.points.iter()).filter(|z| (w[0]..w[1]).contains(&z.norm())).count() as f64;
        let p = w[1] * w[1] - w[0] * w[0];
        let sigma = (total * p * (1.0 - p)).sqrt();
        assert!((count - total * p).abs() <= 3.0 * sigma, "[{}, {}): {count} vs {}", w[0], w[1], total * p);
    }
}

#[test]
fn two_lobed_cloud_stays_in_droplet() {
    // reported, not asserted strictly: mass outside S is an edge effect
    let p = EnsembleParams::new(1.0, 0.0, 30).unwrap().with_d(2).unwrap();
    let h = KernelHandle::lemniscate(&p).unwrap();
    let run = sample_projection_dpp(&h, 77, default_region(&h)).unwrap();
    let spec = DropletSpec::new(2, 1.0).unwrap();
    let outside = run.points.iter().filter(|z| !in_droplet(&spec, **z)).count() as f64 / run.points.len() as f64;
    let right = run.points.iter().filter(|z| z.re > 0.0).count();
    eprintln!("d=2 a=1 N=30: outside fraction {outside:.3}, right lobe {right}/60");
    assert_eq!(run.points.len(), 60);
    assert!(outside < 0.25);
}

#[test]
fn large_lemniscate_beyond_degree_cap_is_unsupported() {
    let p = EnsembleParams::new(1.0, 0.0, 200).unwrap().with_d(2).unwrap();
    assert!(matches!(KernelHandle::lemniscate(&p), Err(Error::Unsupported(_))));
}
