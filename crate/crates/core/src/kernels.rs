//! Finite-N correlation kernels and the exact finite-N identities between them.
//!
//! Kernels are evaluated in the scaled variable of their basis, where the
//! rescaled kernel is simply K̄(u,v); the physical kernel is s²·K̄(sζ,sη).
//! Mode sums are combined in log space with one exponentiation per call.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{determinant, CMatrix};
use crate::orthopoly::{charge_power, lemniscate_basis, point_charge_basis, OPBasis, Scaled, WeightKind};
use crate::params::EnsembleParams;
use crate::sum::ComplexNeumaier;

/// Weight convention of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// e^{−Nζη̄} W(ζ) conj(W(η)) Σ P_j(ζ) conj(P_j(η))/h_j with W = (ζ−a)^c.
    Tilde,
    /// ζ^c conj(η^c) e^{−N(|ζ−a|²+|η−a|²)/2} Σ p_j(ζ) conj(p_j(η)).
    Hat,
    /// ζ^c conj(η^c) e^{−N(|ζ^d−a|²+|η^d−a|²)/2} Σ q_k(ζ) conj(q_k(η)).
    Lemniscate,
}

/// Local coordinates in which a kernel is viewed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescaling {
    /// Physical coordinates.
    None,
    /// ζ = z/s about the origin, kernel divided by s² (s = √N, or N^{1/(2d)} for the lemniscate).
    Origin,
    /// ζ = a + z/√N, kernel divided by N.
    #[serde(rename = "sqrtN_about_a")]
    AboutCharge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    FiniteN,
    LimitBulk,
    LimitEdge,
    Empirical,
}

/// One-point function sampled on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    pub grid: Vec<Complex64>,
    pub values: Vec<f64>,
    pub params: EnsembleParams,
    pub kind: ProfileKind,
    pub rescaling: Rescaling,
    #[serde(rename = "N_terms", skip_serializing_if = "Option::is_none")]
    pub n_terms: Option<usize>,
}

impl DensityProfile {
    pub fn check(&self) -> Result<()> {
        for (z, v) in self.grid.iter().zip(&self.values) {
            if !v.is_finite() || *v < -1e-10 {
                return Err(Error::Numeric(format!("density {v} at {z} is not a finite nonnegative value")));
            }
        }
        Ok(())
    }
}

/// A finite-N kernel bound to a basis and a weight convention.
#[derive(Debug, Clone)]
pub struct KernelHandle {
    basis: Arc<OPBasis>,
    convention: Convention,
    n_terms: usize,
}

impl KernelHandle {
    /// Bind a basis. `n_terms` defaults to the basis size.
    pub fn new(basis: impl Into<Arc<OPBasis>>, convention: Convention, n_terms: Option<usize>) -> Result<Self> {
        let basis = basis.into();
        let n_terms = n_terms.unwrap_or(basis.len());
        if n_terms == 0 || n_terms > basis.len() {
            return Err(Error::InvalidParam(format!("kernel needs 1..={} modes, got {n_terms}", basis.len())));
        }
        let ok = match convention {
            Convention::Tilde => matches!(basis.weight(), WeightKind::PointCharge | WeightKind::Elliptic),
            Convention::Hat => basis.weight() == WeightKind::PointCharge,
            Convention::Lemniscate => basis.weight() == WeightKind::Lemniscate,
        };
        if !ok {
            return Err(Error::InvalidParam(format!(
                "{convention:?} convention does not apply to a {:?} basis",
                basis.weight()
            )));
        }
        Ok(Self { basis, convention, n_terms })
    }

    /// N-mode tilde kernel for |ζ−a|^{2c} e^{−N|ζ|²}.
    pub fn tilde(params: &EnsembleParams) -> Result<Self> {
        let b = point_charge_basis(params, params.n - 1)?;
        Self::new(b, Convention::Tilde, None)
    }

    /// N-mode kernel for |ζ|^{2c} e^{−N|ζ−a|²}.
    pub fn hat(params: &EnsembleParams) -> Result<Self> {
        let b = point_charge_basis(params, params.n - 1)?;
        Self::new(b, Convention::Hat, None)
    }

    /// dN-mode lemniscate kernel.
    pub fn lemniscate(params: &EnsembleParams) -> Result<Self> {
        Self::new(lemniscate_basis(params)?, Convention::Lemniscate, None)
    }

    /// Hat kernel for d = 1, lemniscate kernel otherwise.
    pub fn for_params(params: &EnsembleParams) -> Result<Self> {
        if params.d == 1 {
            Self::hat(params)
        } else {
            Self::lemniscate(params)
        }
    }

    pub fn basis(&self) -> &Arc<OPBasis> {
        &self.basis
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn params(&self) -> &EnsembleParams {
        self.basis.params()
    }

    fn b(&self) -> f64 {
        self.basis.scaled_center()
    }

    fn poly_arg(&self, u: Complex64) -> Complex64 {
        match self.convention {
            Convention::Hat => Complex64::new(self.b(), 0.0) - u,
            _ => u,
        }
    }

    /// Scaled polynomial values at u, in the handle's convention.
    fn polys(&self, u: Complex64) -> Vec<Scaled> {
        self.basis.eval_scaled(self.poly_arg(u), self.n_terms)
    }

    /// Complex log of the Gaussian factor of K̄(u,v).
    fn gauss_log(&self, u: Complex64, v: Complex64) -> Complex64 {
        let b = Complex64::new(self.b(), 0.0);
        match (self.convention, self.basis.weight()) {
            (Convention::Tilde, WeightKind::Elliptic) => {
                let tau = self.params().tau.unwrap_or(0.0);
                (-u * v.conj() + (u * u + (v * v).conj()) * (0.5 * tau)) / (1.0 - tau * tau)
            }
            (Convention::Tilde, _) => -u * v.conj(),
            (Convention::Hat, _) => Complex64::new(-0.5 * ((b - u).norm_sqr() + (b - v).norm_sqr()), 0.0),
            (Convention::Lemniscate, _) => {
                let d = self.params().d as u32;
                Complex64::new(-0.5 * ((u.powu(d) - b).norm_sqr() + (v.powu(d) - b).norm_sqr()), 0.0)
            }
        }
    }

    /// W̄(u)·conj(W̄(v)) in the scaled variable.
    pub fn charge_factor_scaled(&self, u: Complex64, v: Complex64) -> Result<Complex64> {
        let c = self.params().c;
        match (self.convention, self.basis.weight()) {
            (Convention::Tilde, WeightKind::Elliptic) => Ok(Complex64::new(1.0, 0.0)),
            (Convention::Tilde, _) => {
                let b = Complex64::new(self.b(), 0.0);
                Ok(charge_power(u - b, c)? * charge_power(v - b, c)?.conj())
            }
            _ => Ok(charge_power(u, c)? * charge_power(v, c)?.conj()),
        }
    }

    /// Kernel with the charge factor removed, in the scaled variable.
    pub fn reduced_scaled(&self, u: Complex64, v: Complex64) -> Complex64 {
        let pu = self.polys(u);
        let pv = if u == v { pu.clone() } else { self.polys(v) };
        let s = mode_sum(&pu, &pv, self.basis.scaled_ln_norms());
        apply_log(s, self.gauss_log(u, v))
    }

    /// Rescaled kernel K̄(u,v).
    pub fn scaled(&self, u: Complex64, v: Complex64) -> Result<Complex64> {
        let cf = self.charge_factor_scaled(u, v)?;
        if cf.norm() == 0.0 {
            return Ok(cf);
        }
        Ok(cf * self.reduced_scaled(u, v))
    }

    /// Physical kernel K_N(ζ,η).
    pub fn eval(&self, zeta: Complex64, eta: Complex64) -> Result<Complex64> {
        let s = self.basis.scale();
        Ok(self.scaled(zeta * s, eta * s)? * (s * s))
    }

    /// Physical one-point function.
    pub fn density(&self, zeta: Complex64) -> Result<f64> {
        Ok(self.eval(zeta, zeta)?.re)
    }

    /// Scaled variable of a point given in the chosen local coordinates.
    pub fn to_scaled(&self, z: Complex64, mode: Rescaling) -> Result<Complex64> {
        let s = self.basis.scale();
        match mode {
            Rescaling::None => Ok(z * s),
            Rescaling::Origin => Ok(z),
            Rescaling::AboutCharge => {
                if self.convention == Convention::Lemniscate {
                    return Err(Error::Unsupported("charge-centred rescaling of a lemniscate kernel".into()));
                }
                Ok(Complex64::new(self.b(), 0.0) + z)
            }
        }
    }

    fn mode_factor(&self, mode: Rescaling) -> f64 {
        match mode {
            Rescaling::None => self.basis.scale().powi(2),
            _ => 1.0,
        }
    }

    /// Kernel in local coordinates (1/N)K(a + z/√N, ...) or (1/N)K(z/√N, ...).
    pub fn rescaled(&self, z: Complex64, w: Complex64, mode: Rescaling) -> Result<Complex64> {
        let (u, v) = (self.to_scaled(z, mode)?, self.to_scaled(w, mode)?);
        Ok(self.scaled(u, v)? * self.mode_factor(mode))
    }

    pub fn rescaled_density(&self, z: Complex64, mode: Rescaling) -> Result<f64> {
        Ok(self.rescaled(z, z, mode)?.re)
    }

    /// k-point function det[K(ζ_i, ζ_j)] in the chosen coordinates.
    pub fn k_point_in(&self, points: &[Complex64], mode: Rescaling) -> Result<f64> {
        let k = points.len();
        if k == 0 || k > self.n_terms {
            return Err(Error::InvalidParam(format!("k-point needs 1..={} points, got {k}", self.n_terms)));
        }
        let mut m = CMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = self.rescaled(points[i], points[j], mode)?;
            }
        }
        Ok(determinant(&m).re)
    }

    pub fn k_point(&self, points: &[Complex64]) -> Result<f64> {
        self.k_point_in(points, Rescaling::None)
    }

    /// Berezin kernel |K(z,w)|²/K(z,z) in the chosen coordinates.
    pub fn berezin_in(&self, z: Complex64, w: Complex64, mode: Rescaling) -> Result<f64> {
        let kz = self.rescaled_density(z, mode)?;
        if !(kz > 0.0) {
            return Err(Error::Domain(format!("Berezin kernel undefined: K(z,z) = {kz} at z = {z}")));
        }
        Ok(self.rescaled(z, w, mode)?.norm_sqr() / kz)
    }

    pub fn berezin(&self, z: Complex64, w: Complex64) -> Result<f64> {
        self.berezin_in(z, w, Rescaling::None)
    }

    /// Diagonal on a grid, evaluated in parallel.
    pub fn density_profile(&self, grid: &[Complex64], mode: Rescaling) -> Result<DensityProfile> {
        let values = grid.par_iter().map(|z| self.rescaled_density(*z, mode)).collect::<Result<Vec<f64>>>()?;
        let p = DensityProfile {
            grid: grid.to_vec(),
            values,
            params: self.params().clone(),
            kind: ProfileKind::FiniteN,
            rescaling: mode,
            n_terms: Some(self.n_terms),
        };
        p.check()?;
        Ok(p)
    }

    /// Feature vector f(u) with K̄(u,v) = Σ_j f_j(u) conj(f_j(v)) up to a
    /// unimodular cocycle g(u)conj(g(v)) that cancels in every determinant.
    pub fn features_scaled(&self, u: Complex64) -> Result<Vec<Complex64>> {
        let cf = self.charge_factor_scaled(u, u)?.re.max(0.0).sqrt();
        let g = self.gauss_log(u, u).re;
        let pu = self.polys(u);
        let ln = self.basis.scaled_ln_norms();
        Ok(pu
            .iter()
            .enumerate()
            .map(|(j, p)| {
                if p.is_zero() || cf == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    p.mant * (p.ln_scale + 0.5 * (g - ln[j])).exp() * cf
                }
            })
            .collect())
    }
}

/// Σ_j a_j conj(b_j)/h̄_j from the highest mode down, in split form.
pub(crate) fn mode_sum(a: &[Scaled], b: &[Scaled], ln_norms: &[f64]) -> Scaled {
    let n = a.len().min(b.len());
    let mut top = f64::NEG_INFINITY;
    for j in 0..n {
        if !a[j].is_zero() && !b[j].is_zero() {
            top = top.max(a[j].ln_scale + b[j].ln_scale - ln_norms[j]);
        }
    }
    if !top.is_finite() {
        return Scaled::ZERO;
    }
    let mut acc = ComplexNeumaier::new();
    for j in (0..n).rev() {
        if a[j].is_zero() || b[j].is_zero() {
            continue;
        }
        let e = a[j].ln_scale + b[j].ln_scale - ln_norms[j] - top;
        acc.add(a[j].mant * b[j].mant.conj() * e.exp());
    }
    Scaled { mant: acc.value(), ln_scale: top }
}

/// s·e^{g} for a complex log factor g.
pub(crate) fn apply_log(s: Scaled, g: Complex64) -> Complex64 {
    if s.is_zero() {
        return Complex64::new(0.0, 0.0);
    }
    s.mant * Complex64::from_polar(1.0, g.im) * (s.ln_scale + g.re).exp()
}

/// Relative residual |l − r| / max(|l|, |r|, 1e−300).
pub fn relative_residual(lhs: Complex64, rhs: Complex64) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

impl IdentityCheck {
    pub fn new(lhs: Complex64, rhs: Complex64) -> Self {
        Self { lhs, rhs, residual: relative_residual(lhs, rhs) }
    }
}

/// Insertion recursion R̂^{c+1}_N(z) = R̂^c_{N+1}(z) − B̂^c_{N+1}(0,z).
///
/// Both sides use the weight scale N and the rescaling z/√N; the charge-c
/// side sums N+1 modes. The Berezin term is taken with the charge factor at
/// the conditioning point cancelled, |z|^{2c}|r(0,z)|²/r(0,0).
pub fn insertion_recursion_check(params: &EnsembleParams, z: Complex64) -> Result<IdentityCheck> {
    params.validate()?;
    if params.d != 1 {
        return Err(Error::InvalidParam("insertion recursion applies to d = 1".into()));
    }
    let n = params.n;
    let bc = point_charge_basis(params, n)?;
    let bc1 = point_charge_basis(&params.clone().with_c(params.c + 1.0)?, n - 1)?;
    insertion_recursion_with(&bc, &bc1, z)
}

/// Insertion recursion from prebuilt bases for charges c (≥ N+1 polynomials) and c+1.
pub fn insertion_recursion_with(basis_c: &OPBasis, basis_c1: &OPBasis, z: Complex64) -> Result<IdentityCheck> {
    let n = basis_c1.params().n;
    let kc = KernelHandle::new(Arc::new(basis_c.clone()), Convention::Hat, Some(n + 1))?;
    let kc1 = KernelHandle::new(Arc::new(basis_c1.clone()), Convention::Hat, Some(n))?;
    let lhs = kc1.rescaled(z, z, Rescaling::Origin)?;
    let zero = Complex64::new(0.0, 0.0);
    let r00 = kc.reduced_scaled(zero, zero).re;
    if !(r00 > 0.0) {
        return Err(Error::Domain("reduced kernel vanishes at the conditioning point".into()));
    }
    let r0z = kc.reduced_scaled(zero, z);
    let c = basis_c.params().c;
    let zc = if z.norm() == 0.0 {
        if c == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        z.norm().powf(2.0 * c)
    };
    let berezin = zc * r0z.norm_sqr() / r00;
    let rhs = kc.rescaled(z, z, Rescaling::Origin)? - berezin;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Multi-fold identity K_{dN}(z,w) = d Σ_l (zw̄)^{c+l} r_l(z^d, w^d).
///
/// The left side uses the expanded child coefficient arrays; the right side
/// the d parent kernels with charge factor removed. The charge powers
/// (zw̄)^{c+l} = z^{c+l} conj(w^{c+l}) are the continuous lift of the
/// printed d(zw̄)^{d−1}(z^d w̄^d)^{c_l}, which agrees with it on the diagonal.
pub fn multifold_check(params: &EnsembleParams, z: Complex64, w: Complex64) -> Result<IdentityCheck> {
    let child = lemniscate_basis(params)?;
    multifold_with(&child, z, w)
}

pub fn multifold_with(child: &OPBasis, z: Complex64, w: Complex64) -> Result<IdentityCheck> {
    let p = child.params();
    let d = p.d;
    let lhs = child_kernel_expanded(child, z, w)?;
    let zd = z.powu(d as u32);
    let wd = w.powu(d as u32);
    let cf = charge_power(z, p.c)? * charge_power(w, p.c)?.conj();
    let mut rhs = Complex64::new(0.0, 0.0);
    for (l, parent) in child.parents().iter().enumerate() {
        let h = KernelHandle::new(parent.clone(), Convention::Hat, Some(p.n))?;
        let zl = (z * w.conj()).powu(l as u32);
        rhs += zl * h.reduced_scaled(zd, wd);
    }
    Ok(IdentityCheck::new(lhs, cf * rhs * d as f64))
}

/// Rescaled lemniscate kernel from the stored coefficient arrays, with the
/// charge phase taken from (z, w) and the reduced part evaluated at (z, w2).
fn child_kernel_pair(child: &OPBasis, z: Complex64, w: Complex64, w2: Complex64) -> Result<Complex64> {
    let p = child.params();
    let d = p.d as u32;
    let b = child.scaled_center();
    let cf = charge_power(z, p.c)? * charge_power(w, p.c)?.conj();
    let n = child.len();
    let pz = child.eval_scaled_expanded(z, n);
    let pw = child.eval_scaled_expanded(w2, n);
    let s = mode_sum(&pz, &pw, child.scaled_ln_norms());
    let g = -0.5 * ((z.powu(d) - b).norm_sqr() + (w2.powu(d) - b).norm_sqr());
    Ok(cf * apply_log(s, Complex64::new(g, 0.0)))
}

fn child_kernel_expanded(child: &OPBasis, z: Complex64, w: Complex64) -> Result<Complex64> {
    child_kernel_pair(child, z, w, w)
}

/// The d = 2 relations K(z,w) ± K(z,−w) = 4 z w̄ K̂^{(c−1)/2 or c/2}(z², w²).
///
/// K(z,−w) carries the charge phase of (z,w), matching the lifted powers
/// on the right. Returns the "+" and "−" checks.
pub fn fold2_relations_check(params: &EnsembleParams, z: Complex64, w: Complex64) -> Result<[IdentityCheck; 2]> {
    if params.d != 2 {
        return Err(Error::InvalidParam("the two-fold relations need d = 2".into()));
    }
    let child = lemniscate_basis(params)?;
    let k_plus = child_kernel_pair(&child, z, w, w)?;
    let k_minus = child_kernel_pair(&child, z, w, -w)?;
    let cf = charge_power(z, params.c)? * charge_power(w, params.c)?.conj();
    let (z2, w2) = (z * z, w * w);
    let parents = child.parents();
    let r0 = KernelHandle::new(parents[0].clone(), Convention::Hat, Some(params.n))?.reduced_scaled(z2, w2);
    let r1 = KernelHandle::new(parents[1].clone(), Convention::Hat, Some(params.n))?.reduced_scaled(z2, w2);
    Ok([
        IdentityCheck::new(k_plus + k_minus, cf * r0 * 4.0),
        IdentityCheck::new(k_plus - k_minus, cf * z * w.conj() * r1 * 4.0),
    ])
}
