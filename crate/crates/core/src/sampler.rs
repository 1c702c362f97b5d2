//! Exact sampling of the finite-N determinantal ensembles.
//!
//! The projection sampler draws points one at a time from the conditional
//! density K(u,u) − ‖P_k f(u)‖², where f is the kernel's feature map and
//! P_k projects onto the span of the features of the points drawn so far
//! (kept as an orthonormal frame). Each conditional draw is by rejection
//! against a uniform envelope on a disc. Point k uses its own ChaCha20
//! stream (`seed`, stream k), so runs are reproducible bit for bit and
//! independent across seeds.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::droplet::DropletSpec;
use crate::error::{Error, Result};
use crate::kernels::{Convention, DensityProfile, KernelHandle, ProfileKind, Rescaling};
use crate::orthopoly::WeightKind;
use crate::params::EnsembleParams;

/// Envelope constant = this factor × the grid maximum of the conditional density.
pub const ENVELOPE_SAFETY: f64 = 1.5;
/// Region radius = this factor × the droplet radius, plus [`EDGE_MARGIN`]/√N.
pub const REGION_FACTOR: f64 = 1.3;
pub const EDGE_MARGIN: f64 = 4.0;
/// Envelope grid points per sampled point.
pub const GRID_PER_POINT: usize = 8;
/// Envelope doublings allowed for one point before giving up.
pub const MAX_INFLATIONS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Complex64,
    pub radius: f64,
}

impl Region {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }

    /// Uniform point of the disc.
    fn propose<R: Rng>(&self, rng: &mut R) -> Complex64 {
        let r = self.radius * rng.random::<f64>().sqrt();
        let t = 2.0 * PI * rng.random::<f64>();
        self.center + Complex64::from_polar(r, t)
    }

    /// `n` nearly uniform points of the disc (Vogel spiral).
    fn spiral(&self, n: usize) -> Vec<Complex64> {
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let r = self.radius * ((i as f64 + 0.5) / n as f64).sqrt();
                self.center + Complex64::from_polar(r, golden * i as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Envelope violations, each followed by doubling the envelope.
    pub inflations: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRun {
    pub params: EnsembleParams,
    pub seed: u64,
    pub points: Vec<Complex64>,
    pub acceptance_stats: AcceptanceStats,
    pub region: Region,
}

/// Generator for point `index` of run `seed`: ChaCha20 keyed by the seed,
/// stream number = point index.
pub fn point_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Droplet centre and radius of the kernel's ensemble, in physical
/// coordinates, before any margin.
pub fn droplet_disc(handle: &KernelHandle) -> (Complex64, f64) {
    let p = handle.params();
    let n = p.n as f64;
    let hole = p.c.max(0.0) / n;
    match (handle.convention(), handle.basis().weight()) {
        (Convention::Tilde, WeightKind::Elliptic) => (Complex64::new(0.0, 0.0), 1.0 + p.tau.unwrap_or(0.0)),
        (Convention::Tilde, _) => (Complex64::new(0.0, 0.0), (1.0 + hole).sqrt()),
        (Convention::Hat, _) => (Complex64::new(p.a, 0.0), (1.0 + hole).sqrt()),
        (Convention::Lemniscate, _) => {
            let spec = DropletSpec { d: p.d, a: p.a };
            let (c, r) = spec.enclosing_disc();
            (c, (r.powi(2 * p.d as i32) + hole).powf(0.5 / p.d as f64))
        }
    }
}

/// Default rejection region: the droplet disc widened by [`REGION_FACTOR`]
/// plus an edge margin of [`EDGE_MARGIN`]/√N.
pub fn default_region(handle: &KernelHandle) -> Region {
    let (center, r) = droplet_disc(handle);
    let n = handle.params().n as f64;
    Region { center, radius: REGION_FACTOR * r + EDGE_MARGIN / n.sqrt() }
}

/// Sequential sampler of the projection process with kernel `handle`.
pub fn sample_projection_dpp(handle: &KernelHandle, seed: u64, region: Region) -> Result<SampleRun> {
    let (c0, r0) = droplet_disc(handle);
    if (c0 - region.center).norm() + 1.2 * r0 > region.radius {
        return Err(Error::InvalidParam(format!(
            "region (centre {}, radius {}) must contain the droplet disc (centre {c0}, radius {r0}) with a 20% margin",
            region.center, region.radius
        )));
    }
    let s = handle.basis().scale();
    let n = handle.n_terms();
    let feats = |zeta: Complex64| handle.features_scaled(zeta * s);

    let grid = region.spiral(GRID_PER_POINT * n.max(32));
    let grid_feats = grid.par_iter().map(|z| feats(*z)).collect::<Result<Vec<_>>>()?;
    let mut resid: Vec<f64> = grid_feats.iter().map(|f| norm_sqr(f)).collect();

    let mut frame: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    let mut stats = AcceptanceStats::default();
    for k in 0..n {
        let mut rng = point_rng(seed, k);
        let peak = resid.iter().cloned().fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(Error::Numeric(format!("conditional density vanishes on the envelope grid at point {k}")));
        }
        let mut envelope = ENVELOPE_SAFETY * peak;
        let mut inflations = 0u32;
        let (zeta, f) = loop {
            let zeta = region.propose(&mut rng);
            let f = feats(zeta)?;
            let p = conditional(&f, &frame);
            stats.proposals += 1;
            if p > envelope {
                inflations += 1;
                stats.inflations += 1;
                if inflations > MAX_INFLATIONS {
                    return Err(Error::Numeric(format!(
                        "envelope still violated after {MAX_INFLATIONS} doublings at point {k}"
                    )));
                }
                envelope *= 2.0;
                continue;
            }
            if rng.random::<f64>() * envelope < p {
                break (zeta, f);
            }
        };
        stats.accepted += 1;
        points.push(zeta);
        if k + 1 == n {
            break;
        }
        let e = orthonormal_direction(&f, &frame)
            .ok_or_else(|| Error::Numeric(format!("feature of point {k} lies in the span of earlier points")))?;
        resid.par_iter_mut().zip(&grid_feats).for_each(|(r, g)| *r = (*r - inner(g, &e).norm_sqr()).max(0.0));
        frame.push(e);
    }
    Ok(SampleRun { params: handle.params().clone(), seed, points, acceptance_stats: stats, region })
}

/// Independent runs for several seeds, in parallel.
pub fn sample_many(handle: &KernelHandle, seeds: &[u64], region: Region) -> Result<Vec<SampleRun>> {
    seeds.par_iter().map(|s| sample_projection_dpp(handle, *s, region)).collect()
}

fn norm_sqr(f: &[Complex64]) -> f64 {
    f.iter().map(|x| x.norm_sqr()).sum()
}

/// ⟨f, e⟩ = Σ f_j conj(e_j).
fn inner(f: &[Complex64], e: &[Complex64]) -> Complex64 {
    f.iter().zip(e).map(|(a, b)| a * b.conj()).sum()
}

fn conditional(f: &[Complex64], frame: &[Vec<Complex64>]) -> f64 {
    let proj: f64 = frame.iter().map(|e| inner(f, e).norm_sqr()).sum();
    (norm_sqr(f) - proj).max(0.0)
}

/// Unit vector of f minus its projection onto the frame (two passes).
fn orthonormal_direction(f: &[Complex64], frame: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    let mut v = f.to_vec();
    for _ in 0..2 {
        for e in frame {
            let c = inner(&v, e);
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
    }
    let nv = norm_sqr(&v).sqrt();
    if !(nv > 1e-12 * norm_sqr(f).sqrt()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    Some(v)
}

/// Exact sample at a = 0 in O(dN) draws.
///
/// With weight |ζ|^{2c}e^{−N|ζ|^{2d}} the moduli of the dN points are
/// independent with N|ζ_k|^{2d} ~ Gamma((k+c+1)/d, 1), k < dN, and the
/// angles are uniform. For d ≥ 2 this is the d-th root, on a uniform
/// branch, of the d = 1 sample with the mapped charges.
pub fn sample_radial(c: f64, n: usize, d: usize, seed: u64) -> Result<SampleRun> {
    let params = EnsembleParams::new(0.0, c, n)?.with_d(d)?;
    let nf = n as f64;
    let df = d as f64;
    let count = d * n;
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = point_rng(seed, k);
        let shape = (k as f64 + c + 1.0) / df;
        let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidParam(format!("gamma law: {e}")))?;
        let s: f64 = g.sample(&mut rng) / nf;
        let theta = 2.0 * PI * rng.random::<f64>();
        points.push(Complex64::from_polar(s.powf(0.5 / df), theta));
    }
    let r_max = points.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r_drop = (1.0 + c.max(0.0) / nf).powf(0.5 / df);
    Ok(SampleRun {
        params,
        seed,
        points,
        acceptance_stats: AcceptanceStats { proposals: count as u64, accepted: count as u64, inflations: 0 },
        region: Region { center: Complex64::new(0.0, 0.0), radius: (REGION_FACTOR * r_drop).max(r_max) },
    })
}

/// bins × bins histogram over the square circumscribing the run's region,
/// as a density against dA (cell counts over cell area), so the values
/// times the cell area sum to the number of points.
pub fn empirical_histogram(run: &SampleRun, bins: usize) -> Result<DensityProfile> {
    if bins == 0 {
        return Err(Error::InvalidParam("histogram needs at least one bin".into()));
    }
    let Region { center, radius } = run.region;
    let h = 2.0 * radius / bins as f64;
    let (x0, y0) = (center.re - radius, center.im - radius);
    let mut counts = vec![0usize; bins * bins];
    for z in &run.points {
        let i = (((z.re - x0) / h).floor() as isize).clamp(0, bins as isize - 1) as usize;
        let j = (((z.im - y0) / h).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[j * bins + i] += 1;
    }
    let area = h * h;
    let mut grid = Vec::with_capacity(bins * bins);
    let mut values = Vec::with_capacity(bins * bins);
    for j in 0..bins {
        for i in 0..bins {
            grid.push(Complex64::new(x0 + (i as f64 + 0.5) * h, y0 + (j as f64 + 0.5) * h));
            values.push(counts[j * bins + i] as f64 / area);
        }
    }
    Ok(DensityProfile {
        grid,
        values,
        params: run.params.clone(),
        kind: ProfileKind::Empirical,
        rescaling: Rescaling::None,
        n_terms: Some(run.points.len()),
    })
}
