//! Droplet S = {|ζ^d − a| ≤ 1}: boundary curves, membership and the mass
//! of the equilibrium density d|ζ|^{2d−2} against dA/π.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_adaptive_c64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropletSpec {
    pub d: usize,
    pub a: f64,
}

/// Topology of the droplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// a < 1: one component containing the origin.
    Connected,
    /// a = 1: d petals meeting at the origin.
    Critical,
    /// a > 1: d disjoint components.
    Disjoint,
}

impl DropletSpec {
    pub fn new(d: usize, a: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParam("d must be positive".into()));
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidParam(format!("a must be finite and >= 0, got {a}")));
        }
        Ok(Self { d, a })
    }

    pub fn topology(&self) -> Topology {
        if self.a < 1.0 {
            Topology::Connected
        } else if self.a == 1.0 {
            Topology::Critical
        } else {
            Topology::Disjoint
        }
    }

    /// Smallest disc about the symmetry centre containing S: centre a for
    /// d = 1, the origin with radius (a+1)^{1/d} otherwise.
    pub fn enclosing_disc(&self) -> (Complex64, f64) {
        if self.d == 1 {
            (Complex64::new(self.a, 0.0), 1.0)
        } else {
            (Complex64::new(0.0, 0.0), (self.a + 1.0).powf(1.0 / self.d as f64))
        }
    }
}

/// |ζ^d − a| ≤ 1.
pub fn in_droplet(spec: &DropletSpec, zeta: Complex64) -> bool {
    (zeta.powu(spec.d as u32) - spec.a).norm() <= 1.0
}

/// Boundary ∂S as closed polylines, one per connected branch.
///
/// ∂Ŝ = {a + e^{iθ}} is lifted by a d-th root that is continuous in θ.
/// For a < 1 the lift winds d times and yields one curve; for a > 1 the
/// principal root is continuous and its d rotations are the components;
/// for a = 1 the parameterization is split at θ = π, where the curve
/// passes through 0, giving d petals that start and end at the origin.
pub fn boundary_points(spec: &DropletSpec, n_per_branch: usize) -> Result<Vec<Vec<Complex64>>> {
    if n_per_branch < 16 {
        return Err(Error::InvalidParam(format!("need at least 16 points per branch, got {n_per_branch}")));
    }
    let d = spec.d;
    let df = d as f64;
    let a = spec.a;
    let rot = |k: usize| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / df);
    match spec.topology() {
        Topology::Connected => {
            let n = n_per_branch * d;
            let pts = (0..=n)
                .into_par_iter()
                .map(|i| {
                    let phi = 2.0 * PI * df * i as f64 / n as f64;
                    let eta = Complex64::new(a, 0.0) + Complex64::from_polar(1.0, phi);
                    // arg(a + e^{iφ}) = φ + arg(1 + a e^{−iφ}), the latter principal since a < 1
                    let arg = phi + (Complex64::new(1.0, 0.0) + Complex64::from_polar(a, -phi)).arg();
                    Complex64::from_polar(eta.norm().powf(1.0 / df), arg / df)
                })
                .collect();
            Ok(vec![pts])
        }
        Topology::Critical | Topology::Disjoint => {
            let critical = spec.topology() == Topology::Critical;
            let base: Vec<Complex64> = (0..=n_per_branch)
                .into_par_iter()
                .map(|i| {
                    let t = i as f64 / n_per_branch as f64;
                    // at a = 1, cluster nodes at θ = ±π where the root has a cusp
                    let t = if critical { t - (2.0 * PI * t).sin() / (2.0 * PI) } else { t };
                    let theta = -PI + 2.0 * PI * t;
                    if critical && (i == 0 || i == n_per_branch) {
                        return Complex64::new(0.0, 0.0);
                    }
                    let eta = Complex64::new(a, 0.0) + Complex64::from_polar(1.0, theta);
                    Complex64::from_polar(eta.norm().powf(1.0 / df), eta.arg() / df)
                })
                .collect();
            Ok((0..d).map(|k| base.iter().map(|z| z * rot(k)).collect()).collect())
        }
    }
}

/// Radial support {s = r^d} of S along the ray of angle θ, with φ = dθ.
fn radial_support(a: f64, phi: f64) -> Option<(f64, f64)> {
    let disc = 1.0 - (a * phi.sin()).powi(2);
    if disc < 0.0 {
        return None;
    }
    let (m, h) = (a * phi.cos(), disc.sqrt());
    let hi = m + h;
    if hi <= 0.0 {
        return None;
    }
    Some(((m - h).max(0.0), hi))
}

/// (1/π)∫_S d|ζ|^{2d−2} dA by direct polar quadrature in ζ.
///
/// Inner: Gauss–Legendre in r over the exact radial support (the integrand
/// d r^{2d−1} is a polynomial, integrated exactly). Outer: adaptive Gauss in
/// θ, split at the endpoints of the angular support.
pub fn equilibrium_mass(spec: &DropletSpec) -> Result<f64> {
    let d = spec.d;
    let df = d as f64;
    let a = spec.a;
    let rule = gauss_legendre(d.max(1))?;
    let radial = |theta: f64| -> f64 {
        match radial_support(a, df * theta) {
            None => 0.0,
            Some((s_lo, s_hi)) => {
                let (r_lo, r_hi) = (s_lo.powf(1.0 / df), s_hi.powf(1.0 / df));
                let r = rule.mapped(r_lo, r_hi);
                r.integrate(|x| df * x.powi(2 * d as i32 - 1))
            }
        }
    };
    // angular breakpoints per period 2π/d of the integrand
    let period = 2.0 * PI / df;
    let mut cuts = vec![0.0];
    if a > 1.0 {
        let phi0 = (1.0 / a).asin() / df;
        cuts.extend([phi0, period - phi0]);
    } else if a == 1.0 {
        cuts.extend([0.5 * PI / df, period - 0.5 * PI / df]);
    }
    cuts.push(period);
    let f = |t: f64| Complex64::new(radial(t), 0.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate_adaptive_c64(&f, w[0], w[1], 1e-13, 60)?.re;
    }
    Ok(total * df / PI)
}

/// The same mass through η = ζ^d: S covers the disc |η − a| ≤ 1 exactly d
/// times and the Jacobian d²|ζ|^{2d−2} turns the density into 1/d per unit
/// η-area, so the mass is the disc area over π (polar Gauss rule about a).
pub fn equilibrium_mass_pushforward(spec: &DropletSpec) -> Result<f64> {
    let df = spec.d as f64;
    let radial = gauss_legendre(8)?.mapped(0.0, 1.0).integrate(|r| r);
    Ok(df * (2.0 * PI * radial / df) / PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_matches_membership() {
        let spec = DropletSpec::new(3, 0.9).unwrap();
        for k in 0..50 {
            let theta = 0.13 * k as f64;
            if let Some((lo, hi)) = radial_support(spec.a, 3.0 * theta) {
                let mid = (0.5 * (lo + hi)).powf(1.0 / 3.0);
                assert!(in_droplet(&spec, Complex64::from_polar(mid, theta)));
                let out = (hi * 1.01).powf(1.0 / 3.0);
                assert!(!in_droplet(&spec, Complex64::from_polar(out, theta)));
            }
        }
    }
}
