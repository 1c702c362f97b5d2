//! Gauss rules by the Golub–Welsch method.
//!
//! The symmetric tridiagonal Jacobi matrix is diagonalised with implicit QL,
//! tracking only the first component of each eigenvector (enough for weights).

use crate::error::{Error, Result};
use crate::specfun::ln_gamma;

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Map a rule on [−1, 1] to [lo, hi] (Legendre-type weight only).
    pub fn mapped(&self, lo: f64, hi: f64) -> GaussRule {
        let h = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        GaussRule {
            nodes: self.nodes.iter().map(|x| m + h * x).collect(),
            weights: self.weights.iter().map(|w| w * h).collect(),
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        crate::sum::sum_f64(self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)))
    }
}

/// Eigenvalues and squared first eigenvector components of the symmetric
/// tridiagonal matrix with diagonal `d` and off-diagonal `e` (len n−1).
fn tridiag_ql(mut d: Vec<f64>, offdiag: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&offdiag[..n.saturating_sub(1)]);
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NoConvergence { what: "tridiagonal QL", iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m as isize - 1;
            let mut underflow = false;
            while i >= l as isize {
                let iu = i as usize;
                let f = s * e[iu];
                let b = c * e[iu];
                r = f.hypot(g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + 2.0 * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                let fz = z[iu + 1];
                z[iu + 1] = s * z[iu] + c * fz;
                z[iu] = c * z[iu] - s * fz;
                i -= 1;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i] * z[i]).collect()))
}

/// Gauss–Jacobi rule for the weight (1−x)^α (1+x)^β on [−1, 1].
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidParam("Gauss rule needs n >= 1".into()));
    }
    if alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::Domain(format!("Jacobi weight needs alpha, beta > -1, got ({alpha}, {beta})")));
    }
    let ab = alpha + beta;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let a = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        diag.push(a);
        if k >= 1 {
            let t = 2.0 * kf + ab;
            let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
            let den = t * t * (t + 1.0) * (t - 1.0);
            let b2 = if k == 1 {
                // (k+ab) cancels against (t−1) when k = 1
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0))
            } else {
                num / den
            };
            off.push(b2.sqrt());
        }
    }
    let ln_mu0 =
        (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0) - ln_gamma(ab + 2.0);
    let mu0 = ln_mu0.exp();
    let (nodes, w) = tridiag_ql(diag, &off)?;
    Ok(GaussRule { nodes, weights: w.into_iter().map(|v| v * mu0).collect() })
}

pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Adaptive composite Gauss–Legendre integration of a complex integrand.
pub fn integrate_adaptive_c64<F>(f: &F, lo: f64, hi: f64, tol: f64, max_depth: usize) -> Result<num_complex::Complex64>
where
    F: Fn(f64) -> num_complex::Complex64,
{
    let rule = gauss_legendre(20)?;
    let coarse = gauss_legendre(10)?;
    fn panel<F: Fn(f64) -> num_complex::Complex64>(f: &F, r: &GaussRule, lo: f64, hi: f64) -> num_complex::Complex64 {
        let h = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        crate::sum::sum_c64(r.nodes.iter().zip(&r.weights).map(|(x, w)| f(m + h * x) * (w * h)))
    }
    let mut stack = vec![(lo, hi, 0usize)];
    let mut acc = crate::sum::ComplexNeumaier::new();
    let mut evals = 0usize;
    while let Some((a, b, depth)) = stack.pop() {
        let fine = panel(f, &rule, a, b);
        let crude = panel(f, &coarse, a, b);
        evals += 1;
        let err = (fine - crude).norm();
        if err <= tol * (b - a) / (hi - lo) || err <= 1e-15 * fine.norm() {
            acc.add(fine);
        } else if depth >= max_depth {
            return Err(Error::NoConvergence { what: "adaptive Gauss quadrature", iterations: evals });
        } else {
            let mid = 0.5 * (a + b);
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
    }
    Ok(acc.value())
}
