//! Oracles shared by the integration tests. Nothing here calls into the
//! library's numerical routines.
#![allow(dead_code)]

use num_complex::Complex64;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Gauss–Legendre nodes and weights on [−1,1] by Newton iteration.
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            let dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dpp = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dpp * dpp);
                break;
            }
        }
    }
    (x, w)
}

/// Panels on [0, r_max], geometrically graded towards 0.
pub fn graded_panels(r_max: f64, n_uniform: usize, n_graded: usize) -> Vec<(f64, f64)> {
    let h = r_max / n_uniform as f64;
    let mut out = Vec::new();
    let mut lo = h;
    for _ in 0..n_graded {
        let next = lo * 0.25;
        out.push((next, lo));
        lo = next;
    }
    out.push((0.0, lo));
    for i in 1..n_uniform {
        out.push((i as f64 * h, (i + 1) as f64 * h));
    }
    out
}

/// ∫ f dA (dA = d²ζ/π) over the disc of radius r_max about `center`,
/// polar coordinates with graded radial panels and a trapezoid angle rule.
/// The integrand receives the point and its offset from the center.
pub fn polar_integrate<F>(center: Complex64, r_max: f64, n_theta: usize, f: F) -> Complex64
where
    F: Fn(Complex64, Complex64) -> Complex64,
{
    let (gx, gw) = legendre_rule(24);
    let mut acc = c64(0.0, 0.0);
    for (lo, hi) in graded_panels(r_max, 48, 40) {
        let hh = 0.5 * (hi - lo);
        let mm = 0.5 * (hi + lo);
        for (x, w) in gx.iter().zip(&gw) {
            let r = mm + hh * x;
            let mut ang = c64(0.0, 0.0);
            for k in 0..n_theta {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64;
                let off = Complex64::from_polar(r, th);
                ang += f(center + off, off);
            }
            acc += ang * (w * hh * r * 2.0 / n_theta as f64);
        }
    }
    acc
}

pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(c64(0.0, 0.0), |acc, c| acc * z + c)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Γ(x) for x > 0 by the Lanczos approximation in test code (g=5, n=6 Numerical Recipes set).
pub fn gamma_oracle(x: f64) -> f64 {
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_oracle(1.0 - x));
    }
    // shift up and use Stirling with many terms
    let mut shift = 1.0;
    let mut y = x;
    while y < 20.0 {
        shift *= y;
        y += 1.0;
    }
    let ln = (y - 0.5) * y.ln() - y + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * y)
        - 1.0 / (360.0 * y.powi(3))
        + 1.0 / (1260.0 * y.powi(5))
        - 1.0 / (1680.0 * y.powi(7))
        + 1.0 / (1188.0 * y.powi(9));
    ln.exp() / shift
}

/// Nodes (point, offset from center, weight) of the rule used by [`polar_integrate`].
pub fn polar_nodes(center: Complex64, r_max: f64, n_theta: usize) -> Vec<(Complex64, Complex64, f64)> {
    let (gx, gw) = legendre_rule(24);
    let mut out = Vec::new();
    for (lo, hi) in graded_panels(r_max, 48, 40) {
        let hh = 0.5 * (hi - lo);
        let mm = 0.5 * (hi + lo);
        for (x, w) in gx.iter().zip(&gw) {
            let r = mm + hh * x;
            for k in 0..n_theta {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64;
                let off = Complex64::from_polar(r, th);
                out.push((center + off, off, w * hh * r * 2.0 / n_theta as f64));
            }
        }
    }
    out
}

/// Gram matrix of the given polynomials (physical coefficients) under a weight.
pub fn polar_gram<W>(
    coeffs: &[Vec<Complex64>],
    center: Complex64,
    r_max: f64,
    n_theta: usize,
    weight: W,
) -> Vec<Vec<Complex64>>
where
    W: Fn(Complex64, Complex64) -> f64,
{
    let n = coeffs.len();
    let mut g = vec![vec![c64(0.0, 0.0); n]; n];
    let mut vals = vec![c64(0.0, 0.0); n];
    for (z, off, w) in polar_nodes(center, r_max, n_theta) {
        let wt = weight(z, off) * w;
        if wt == 0.0 || !wt.is_finite() {
            continue;
        }
        for (v, cs) in vals.iter_mut().zip(coeffs) {
            *v = horner(cs, z);
        }
        for j in 0..n {
            for k in 0..n {
                g[j][k] += vals[j] * vals[k].conj() * wt;
            }
        }
    }
    g
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value
/// (Kolmogorov series with the Stephens small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let t = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lam * lam).exp();
        p += t;
        if t.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Pearson chi-square p-value; cells with expectation below `min_expected`
/// are pooled into one cell.
pub fn chi_square_p(observed: &[f64], expected: &[f64], min_expected: f64) -> (f64, usize, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let (mut o_pool, mut e_pool) = (0.0, 0.0);
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (o, e) in observed.iter().zip(expected) {
        if *e < min_expected {
            o_pool += o;
            e_pool += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if e_pool > 0.0 {
        stat += (o_pool - e_pool).powi(2) / e_pool;
        cells += 1;
    }
    let dof = (cells - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    (stat, cells, p)
}
