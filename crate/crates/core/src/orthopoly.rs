//! Monic planar orthogonal polynomials and their norms.
//!
//! Every basis is stored in a scaled variable u = s·ζ in which the weight
//! has unit scale: for the point-charge weight |ζ−a|^{2c} e^{−N|ζ|²} this is
//! s = √N and the scaled weight |u−b|^{2c} e^{−|u|²} with b = √N·a. Physical
//! quantities follow from h_j = s^{−2j} κ h̄_j and P_j(ζ) = s^{−j} P̄_j(sζ),
//! which keeps norms in range for N in the hundreds.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd::{Cdd, Dd};
use crate::error::{Error, Result};
use crate::linalg::{ldl_hermitian, unit_lower_inverse, CMatrix};
use crate::params::EnsembleParams;
use crate::quadrature::gauss_jacobi;
use crate::specfun::{ln_gamma, ln_upper_reg_gamma_int};

/// Default degree cap for quadrature bases.
pub const DEGREE_CAP: usize = 64;

/// Pivot tolerance for the Gram factorisation, relative to each pivot's own diagonal.
pub const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionTag {
    Quadrature,
    ExactC1,
    Radial,
    HermiteElliptic,
    LemniscateChild,
}

/// Which planar weight a basis is orthogonal for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// |ζ−a|^{2c} e^{−N|ζ|²}
    PointCharge,
    /// exp(−N(|ζ|² − τ Re ζ²)/(1−τ²))
    Elliptic,
    /// |ζ|^{2c} e^{−N|ζ^d − a|²}
    Lemniscate,
}

/// A complex number held as mant·e^{ln_scale}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mant: Complex64,
    pub ln_scale: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: Complex64::new(0.0, 0.0), ln_scale: 0.0 };

    pub fn value(&self) -> Complex64 {
        if self.mant.re == 0.0 && self.mant.im == 0.0 {
            return self.mant;
        }
        self.mant * self.ln_scale.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    /// ln|value|, −∞ for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mant.norm().ln() + self.ln_scale
    }
}

/// Monic orthogonal polynomials P_0..P_n with norms h_0..h_n.
#[derive(Debug, Clone)]
pub struct OPBasis {
    params: EnsembleParams,
    tag: ConstructionTag,
    weight: WeightKind,
    scale: f64,
    ln_kappa: f64,
    center: f64,
    coeffs: Vec<Vec<Complex64>>,
    ln_norms: Vec<f64>,
    /// h̄_{j+1}/h̄_j held directly, more precise than differences of logs.
    norm_ratios: Vec<f64>,
    /// (j+c+1) − h̄_{j+1}/h̄_j when a construction resolves it beyond double precision.
    norm_defects: Option<Vec<f64>>,
    parents: Vec<Arc<OPBasis>>,
}

fn ratios_from_logs(ln_norms: &[f64]) -> Vec<f64> {
    ln_norms.windows(2).map(|w| (w[1] - w[0]).exp()).collect()
}

impl OPBasis {
    pub fn params(&self) -> &EnsembleParams {
        &self.params
    }

    pub fn tag(&self) -> ConstructionTag {
        self.tag
    }

    pub fn weight(&self) -> WeightKind {
        self.weight
    }

    pub fn degree_max(&self) -> usize {
        self.ln_norms.len() - 1
    }

    pub fn len(&self) -> usize {
        self.ln_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_norms.is_empty()
    }

    /// Variable scale s with u = s·ζ.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// ln κ where h_j = s^{−2j} κ h̄_j.
    pub fn ln_kappa(&self) -> f64 {
        self.ln_kappa
    }

    /// Charge location in the scaled variable (b = s·a for point-charge weights).
    pub fn scaled_center(&self) -> f64 {
        self.center
    }

    /// Parent bases of a lemniscate child, one per residue class.
    pub fn parents(&self) -> &[Arc<OPBasis>] {
        &self.parents
    }

    /// Monic coefficients of P̄_j in u, lowest degree first.
    pub fn scaled_coeffs(&self, j: usize) -> &[Complex64] {
        &self.coeffs[j]
    }

    /// ln h̄_j.
    pub fn scaled_ln_norm(&self, j: usize) -> f64 {
        self.ln_norms[j]
    }

    pub fn scaled_ln_norms(&self) -> &[f64] {
        &self.ln_norms
    }

    /// h̄_{j+1}/h̄_j.
    pub fn scaled_norm_ratio(&self, j: usize) -> f64 {
        self.norm_ratios[j]
    }

    /// (j+c+1) − h̄_{j+1}/h̄_j, the point-charge norm gap relative to h̄_j.
    pub fn scaled_norm_defect(&self, j: usize) -> f64 {
        match &self.norm_defects {
            Some(d) => d[j],
            None => self.params.c + j as f64 + 1.0 - self.norm_ratios[j],
        }
    }

    /// ln h_j for the physical weight.
    pub fn ln_norm(&self, j: usize) -> f64 {
        self.ln_norms[j] - 2.0 * j as f64 * self.scale.ln() + self.ln_kappa
    }

    /// h_j for the physical weight (may underflow for large N).
    pub fn norm(&self, j: usize) -> f64 {
        self.ln_norm(j).exp()
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.norm(j)).collect()
    }

    /// Physical monic coefficients of P_j in ζ.
    pub fn coeffs(&self, j: usize) -> Vec<Complex64> {
        let ls = self.scale.ln();
        self.coeffs[j]
            .iter()
            .enumerate()
            .map(|(m, c)| if m == j { *c } else { c * ((m as f64 - j as f64) * ls).exp() })
            .collect()
    }

    /// P̄_j(u) for j < n_terms, each as a split value.
    pub fn eval_scaled(&self, u: Complex64, n_terms: usize) -> Vec<Scaled> {
        let n_terms = n_terms.min(self.len());
        if self.weight == WeightKind::Lemniscate && !self.parents.is_empty() {
            return self.eval_child(u, n_terms);
        }
        horner_split(&self.coeffs[..n_terms], u)
    }

    /// P̄_j(u) from the stored coefficient arrays, bypassing parent bases.
    pub fn eval_scaled_expanded(&self, u: Complex64, n_terms: usize) -> Vec<Scaled> {
        horner_split(&self.coeffs[..n_terms.min(self.len())], u)
    }

    fn eval_child(&self, u: Complex64, n_terms: usize) -> Vec<Scaled> {
        let d = self.params.d;
        let ud = u.powu(d as u32);
        let w = Complex64::new(self.center, 0.0) - ud;
        let per: Vec<Vec<Scaled>> = self
            .parents
            .iter()
            .enumerate()
            .map(|(l, p)| {
                let need = if n_terms > l { (n_terms - l).div_ceil(d) } else { 0 };
                p.eval_scaled(w, need)
            })
            .collect();
        let (lu, ph) = if u.norm() > 0.0 { (u.norm().ln(), u / u.norm()) } else { (0.0, Complex64::new(0.0, 0.0)) };
        (0..n_terms)
            .map(|k| {
                let (j, l) = (k / d, k % d);
                let pv = per[l][j];
                if l > 0 && u.norm() == 0.0 {
                    return Scaled::ZERO;
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                Scaled { mant: pv.mant * ph.powu(l as u32) * sign, ln_scale: pv.ln_scale + l as f64 * lu }
            })
            .collect()
    }

    /// P̄_j'(u) for j < n_terms from the stored coefficient arrays, in split form.
    pub fn eval_scaled_derivative(&self, u: Complex64, n_terms: usize) -> Vec<Scaled> {
        let n_terms = n_terms.min(self.len());
        let mut out = vec![Scaled::ZERO];
        if n_terms == 0 {
            return Vec::new();
        }
        let der: Vec<Vec<Complex64>> = self.coeffs[1..n_terms]
            .iter()
            .map(|cs| cs.iter().enumerate().skip(1).map(|(m, c)| c * m as f64).collect())
            .collect();
        out.extend(horner_split(&der, u));
        out
    }

    /// P̄_j(u) and P̄_j'(u) in plain arithmetic, j < n_terms.
    pub fn eval_scaled_with_derivative(&self, u: Complex64, n_terms: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let n_terms = n_terms.min(self.len());
        let mut p = Vec::with_capacity(n_terms);
        let mut dp = Vec::with_capacity(n_terms);
        for cs in &self.coeffs[..n_terms] {
            let mut v = Complex64::new(0.0, 0.0);
            let mut dv = Complex64::new(0.0, 0.0);
            for c in cs.iter().rev() {
                dv = dv * u + v;
                v = v * u + c;
            }
            p.push(v);
            dp.push(dv);
        }
        (p, dp)
    }

    /// Physical P_j(ζ) for j ≤ degree_max.
    pub fn eval_poly(&self, zeta: Complex64) -> Vec<Complex64> {
        let ls = self.scale.ln();
        self.eval_scaled(zeta * self.scale, self.len())
            .into_iter()
            .enumerate()
            .map(|(j, v)| Scaled { mant: v.mant, ln_scale: v.ln_scale - j as f64 * ls }.value())
            .collect()
    }

    /// Analytic weight factor W with |W|² equal to the non-Gaussian part of the weight.
    pub fn weight_factor(&self, zeta: Complex64) -> Result<Complex64> {
        match self.weight {
            WeightKind::PointCharge => charge_power(zeta - self.params.a, self.params.c),
            WeightKind::Lemniscate => charge_power(zeta, self.params.c),
            WeightKind::Elliptic => {
                let tau = self.params.tau.unwrap_or(0.0);
                let n = self.params.n as f64;
                Ok((zeta * zeta * (tau * n / (2.0 * (1.0 - tau * tau)))).exp())
            }
        }
    }

    /// ψ_j = W·P_j and φ_j = ψ_j/h_j.
    pub fn eval_psi_phi(&self, zeta: Complex64) -> Result<PsiPhi> {
        let w = self.weight_factor(zeta)?;
        let p = self.eval_poly(zeta);
        let psi: Vec<Complex64> = p.iter().map(|v| v * w).collect();
        let phi = psi.iter().enumerate().map(|(j, v)| v / self.norm(j)).collect();
        Ok(PsiPhi { psi, phi })
    }

    pub fn to_dump(&self) -> BasisDump {
        BasisDump {
            params: self.params.clone(),
            degree_max: self.degree_max(),
            coeffs: (0..self.len()).map(|j| self.coeffs(j).iter().map(|c| [c.re, c.im]).collect()).collect(),
            norms: self.norms(),
            construction_tag: self.tag,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_dump())?)
    }
}

/// Principal-branch z^c, with 0^c = 0 for c > 0 and a domain error for c < 0.
pub fn charge_power(z: Complex64, c: f64) -> Result<Complex64> {
    if c == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if z.norm() == 0.0 {
        return if c > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::Domain("weight factor evaluated at the charge with c < 0".into()))
        };
    }
    Ok(z.powf(c))
}

/// Evaluate several polynomials at u as ρ^j·(Horner in u/ρ), ρ = max(1, |u|).
pub(crate) fn horner_split(coeffs: &[Vec<Complex64>], u: Complex64) -> Vec<Scaled> {
    let rho = u.norm().max(1.0);
    let t = u / rho;
    let lr = rho.ln();
    let maxdeg = coeffs.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut inv_pow = Vec::with_capacity(maxdeg);
    let mut x = 1.0;
    for _ in 0..maxdeg {
        inv_pow.push(x);
        x /= rho;
    }
    coeffs
        .iter()
        .map(|cs| {
            let j = cs.len() - 1;
            let mut acc = Complex64::new(0.0, 0.0);
            for m in (0..=j).rev() {
                acc = acc * t + cs[m] * inv_pow[j - m];
            }
            Scaled { mant: acc, ln_scale: j as f64 * lr }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PsiPhi {
    pub psi: Vec<Complex64>,
    pub phi: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisDump {
    pub params: EnsembleParams,
    pub degree_max: usize,
    pub coeffs: Vec<Vec<[f64; 2]>>,
    pub norms: Vec<f64>,
    pub construction_tag: ConstructionTag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureMeta {
    pub method: String,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Radius of the integration disc about the charge, physical units.
    pub truncation_radius: f64,
}

/// Node-count overrides for Gram quadrature.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadratureOptions {
    pub radial_nodes: Option<usize>,
    pub angular_nodes: Option<usize>,
}

/// Moments M_{jk} = ∫ ζ^j conj(ζ)^k |ζ−a|^{2c} e^{−N|ζ|²} dA(ζ).
///
/// Held as G̃_{jk} = M̄_{jk}/√(j! k!) in the scaled variable.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub params: EnsembleParams,
    pub size: usize,
    pub meta: QuadratureMeta,
    normalized: CMatrix,
}

impl GramMatrix {
    pub fn normalized(&self) -> &CMatrix {
        &self.normalized
    }

    /// M̄_{jk} in the scaled variable.
    pub fn scaled_entry(&self, j: usize, k: usize) -> Complex64 {
        self.normalized[(j, k)] * (0.5 * (ln_fact(j) + ln_fact(k))).exp()
    }

    /// Physical M_{jk}.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        let n = self.params.n as f64;
        let ln_conv = -0.5 * (j + k) as f64 * n.ln() - (self.params.c + 1.0) * n.ln();
        self.normalized[(j, k)] * (0.5 * (ln_fact(j) + ln_fact(k)) + ln_conv).exp()
    }

    /// Physical matrix (entries may underflow for large N).
    pub fn entries(&self) -> CMatrix {
        CMatrix::from_fn(self.size, self.size, |j, k| self.entry(j, k))
    }
}

fn ln_fact(j: usize) -> f64 {
    ln_gamma(j as f64 + 1.0)
}

fn check_point_charge(params: &EnsembleParams) -> Result<()> {
    params.validate()?;
    if params.d != 1 {
        return Err(Error::InvalidParam("point-charge Gram requires d = 1".into()));
    }
    Ok(())
}

/// Gram matrix by polar quadrature about the charge.
///
/// Radial Gauss–Jacobi rule with weight ρ^{2c+1} (absorbing the charge
/// singularity), trapezoid rule in angle.
pub fn compute_gram(params: &EnsembleParams, size: usize) -> Result<GramMatrix> {
    compute_gram_with(params, size, QuadratureOptions::default())
}

/// Polar product rule about the charge for polynomials up to a given degree.
struct PolarRule {
    b: f64,
    r_max: f64,
    half: f64,
    pref: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    angles: Vec<Complex64>,
}

impl PolarRule {
    fn new(params: &EnsembleParams, size: usize, opts: QuadratureOptions) -> Result<Self> {
        let c = params.c;
        let b = params.sqrt_n() * params.a;
        let deg = (size - 1) as f64;
        let x0 = deg + c.max(0.0);
        let xt = x0 + 40.0 + 9.0 * (x0 + 1.0).sqrt();
        let r_max = b + xt.sqrt();
        let n_r = opts.radial_nodes.unwrap_or((4.0 * deg + 80.0 + 6.0 * r_max).ceil() as usize);
        let band = 8.6 * (2.0 * b * r_max).sqrt() + 2.0 * deg + 16.0;
        let n_t = opts.angular_nodes.unwrap_or(((8.0 * deg + 64.0).max(band) / 4.0).ceil() as usize * 4);
        let rule = gauss_jacobi(n_r, 0.0, 2.0 * c + 1.0)?;
        let half = 0.5 * r_max;
        let angles =
            (0..n_t).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n_t as f64)).collect();
        Ok(Self {
            b,
            r_max,
            half,
            pref: half.powf(2.0 * c + 2.0) * 2.0 / n_t as f64,
            nodes: rule.nodes,
            weights: rule.weights,
            angles,
        })
    }

    fn meta(&self, sn: f64) -> QuadratureMeta {
        QuadratureMeta {
            method: "polar_gauss_jacobi".into(),
            radial_nodes: self.nodes.len(),
            angular_nodes: self.angles.len(),
            truncation_radius: self.r_max / sn,
        }
    }

    fn len(&self) -> usize {
        self.nodes.len() * self.angles.len()
    }

    /// Scaled nodes u and square roots of the full weights, Gaussian included.
    fn points(&self) -> (Vec<Complex64>, Vec<f64>) {
        let mut us = Vec::with_capacity(self.len());
        let mut ws = Vec::with_capacity(self.len());
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let rho = self.half * (1.0 + x);
            let root = (w * self.pref).sqrt();
            for e in &self.angles {
                let u = Complex64::new(self.b, 0.0) + e * rho;
                let g = (-0.5 * u.norm_sqr()).exp();
                if g == 0.0 {
                    continue;
                }
                us.push(u);
                ws.push(root * g);
            }
        }
        (us, ws)
    }
}

pub fn compute_gram_with(params: &EnsembleParams, size: usize, opts: QuadratureOptions) -> Result<GramMatrix> {
    check_point_charge(params)?;
    if size == 0 {
        return Err(Error::InvalidParam("Gram size must be at least 1".into()));
    }
    let rule = PolarRule::new(params, size, opts)?;
    let (b, half, pref) = (rule.b, rule.half, rule.pref);
    let angles = &rule.angles;
    let inv_sigma_step: Vec<f64> = (0..size).map(|j| 1.0 / ((j + 1) as f64).sqrt()).collect();
    let tri = size * (size + 1) / 2;
    let partial: Vec<Vec<Complex64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&x, &w)| {
            let rho = half * (1.0 + x);
            let mut acc = vec![Complex64::new(0.0, 0.0); tri];
            let mut t = vec![Complex64::new(0.0, 0.0); size];
            for e in angles {
                let u = Complex64::new(b, 0.0) + e * rho;
                let g = (-0.5 * u.norm_sqr()).exp();
                if g == 0.0 {
                    continue;
                }
                t[0] = Complex64::new(g, 0.0);
                for j in 1..size {
                    t[j] = t[j - 1] * u * inv_sigma_step[j - 1];
                }
                let mut idx = 0;
                for j in 0..size {
                    let tj = t[j];
                    for tk in &t[..=j] {
                        acc[idx] += tj * tk.conj();
                        idx += 1;
                    }
                }
            }
            let s = w * pref;
            acc.iter_mut().for_each(|v| *v *= s);
            acc
        })
        .collect();
    let mut sum = vec![Complex64::new(0.0, 0.0); tri];
    for p in &partial {
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut g = CMatrix::zeros(size, size);
    let mut idx = 0;
    for j in 0..size {
        for k in 0..=j {
            g[(j, k)] = sum[idx];
            g[(k, j)] = sum[idx].conj();
            idx += 1;
        }
    }
    g.hermitize();
    Ok(GramMatrix { params: params.clone(), size, meta: rule.meta(params.sqrt_n()), normalized: g })
}

/// Gram matrix for a non-negative integer charge from the binomial expansion
/// of |u−b|^{2c} into Gaussian monomial moments.
pub fn gram_integer_charge(params: &EnsembleParams, size: usize) -> Result<GramMatrix> {
    check_point_charge(params)?;
    let c = params.c;
    if c < 0.0 || c.fract() != 0.0 {
        return Err(Error::Unsupported(format!("binomial Gram needs integer c >= 0, got {c}")));
    }
    let ci = c as usize;
    let b = params.sqrt_n() * params.a;
    let binom = |n: usize, k: usize| -> f64 { (ln_fact(n) - ln_fact(k) - ln_fact(n - k)).exp().round() };
    let g = CMatrix::from_fn(size, size, |j, k| {
        let mut acc = crate::sum::Neumaier::new();
        for p in 0..=ci {
            let jp = j + p;
            if jp < k || jp - k > ci {
                continue;
            }
            let q = jp - k;
            let e = (2 * ci - p - q) as i32;
            let bp = (-b).powi(e);
            let mag = (ln_fact(jp) - 0.5 * (ln_fact(j) + ln_fact(k))).exp();
            acc.add(binom(ci, p) * binom(ci, q) * bp * mag);
        }
        Complex64::new(acc.value(), 0.0)
    });
    Ok(GramMatrix {
        params: params.clone(),
        size,
        meta: QuadratureMeta {
            method: "binomial_closed_form".into(),
            radial_nodes: 0,
            angular_nodes: 0,
            truncation_radius: f64::INFINITY,
        },
        normalized: g,
    })
}

/// Monic basis P_0..P_n from an LDL^H factorisation of the Gram matrix.
pub fn monic_basis_from_gram(gram: &GramMatrix, n: usize) -> Result<OPBasis> {
    if n >= gram.size {
        return Err(Error::InvalidParam(format!("degree {n} needs a Gram matrix larger than {}", gram.size)));
    }
    let m = n + 1;
    let block = CMatrix::from_fn(m, m, |j, k| gram.normalized[(j, k)]);
    let (l, d) = ldl_hermitian(&block, PIVOT_TOL).map_err(|e| match e {
        Error::Resolution(msg) => {
            Error::Resolution(format!("{msg}; increase quadrature node counts or lower the degree"))
        }
        other => other,
    })?;
    let li = unit_lower_inverse(&l);
    let coeffs = (0..m)
        .map(|j| {
            (0..=j)
                .map(|k| {
                    if k == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        li[(j, k)] * (0.5 * (ln_fact(j) - ln_fact(k))).exp()
                    }
                })
                .collect()
        })
        .collect();
    let ln_norms = (0..m).map(|j| ln_fact(j) + d[j].ln()).collect();
    let ratios = (1..m).map(|j| j as f64 * d[j] / d[j - 1]).collect();
    let p = &gram.params;
    Ok(point_charge_basis_raw(p, ConstructionTag::Quadrature, coeffs, ln_norms, Some(ratios)))
}

/// Work budget (nodes × degree²) for the extended-precision construction.
pub const ARNOLDI_BUDGET: f64 = 1e8;

fn dot_dd(x: &[Cdd], y: &[Cdd]) -> Cdd {
    x.par_iter()
        .zip(y.par_iter())
        .fold(|| Cdd::ZERO, |acc, (a, b)| acc + a.conj() * *b)
        .reduce(|| Cdd::ZERO, |a, b| a + b)
}

fn norm_sqr_dd(x: &[Cdd]) -> Dd {
    x.par_iter().fold(|| Dd::ZERO, |acc, a| acc + a.norm_sqr()).reduce(|| Dd::ZERO, |a, b| a + b)
}

/// Whether the extended-precision construction fits the work budget.
pub fn arnoldi_fits(params: &EnsembleParams, n: usize) -> bool {
    PolarRule::new(params, n + 1, QuadratureOptions::default())
        .map(|r| r.len() as f64 * ((n + 1) * (n + 1)) as f64 <= ARNOLDI_BUDGET)
        .unwrap_or(false)
}

/// Monic basis by Arnoldi orthogonalisation of u·q_k against the previous
/// orthonormal vectors sampled on the polar quadrature nodes, carried out in
/// double-double arithmetic.
///
/// The norm gaps (k+c+1)h̄_k − h̄_{k+1} are exponentially small in k once the
/// charge sits inside the bulk, so they are taken from the extended-precision
/// ratios before rounding rather than from rounded norms.
pub fn arnoldi_basis(params: &EnsembleParams, n: usize, opts: QuadratureOptions) -> Result<OPBasis> {
    check_point_charge(params)?;
    let rule = PolarRule::new(params, n + 1, opts)?;
    let (us, ws) = rule.points();
    let w0: Vec<Cdd> = ws.iter().map(|w| Cdd::new(Complex64::new(*w, 0.0))).collect();
    let norm0 = norm_sqr_dd(&w0);
    if !(norm0.hi > 0.0) {
        return Err(Error::Resolution("quadrature weight vanishes on every node".into()));
    }
    let inv0 = norm0.sqrt().recip();
    let mut qs: Vec<Vec<Cdd>> = vec![w0.iter().map(|w| w.scale(inv0)).collect()];
    let mut ln_norms = vec![norm0.ln()];
    let mut ratios = Vec::with_capacity(n);
    let mut defects = Vec::with_capacity(n);
    // β_i = √(h̄_{i+1}/h̄_i)
    let mut betas: Vec<Dd> = Vec::with_capacity(n);
    let one = Cdd::real(Dd::new(1.0));
    let mut coeffs: Vec<Vec<Cdd>> = vec![vec![one]];
    for k in 0..n {
        let mut v: Vec<Cdd> = qs[k].par_iter().zip(us.par_iter()).map(|(q, u)| q.mul_c64(*u)).collect();
        let mut h = vec![Cdd::ZERO; k + 1];
        for _ in 0..2 {
            for (j, q) in qs.iter().enumerate() {
                let hj = dot_dd(q, &v);
                v.par_iter_mut().zip(q.par_iter()).for_each(|(x, y)| *x = *x - hj * *y);
                h[j] = h[j] + hj;
            }
        }
        let beta2 = norm_sqr_dd(&v);
        if !(beta2.hi > PIVOT_TOL * PIVOT_TOL * (k + 1) as f64) {
            return Err(Error::Resolution(format!(
                "Arnoldi step {k} lost orthogonality; increase quadrature node counts or lower the degree"
            )));
        }
        let beta = beta2.sqrt();
        let inv = beta.recip();
        v.par_iter_mut().for_each(|x| *x = x.scale(inv));
        qs.push(v);
        // P̄_{k+1} = u P̄_k − Σ_j h_jk √(h̄_k/h̄_j) P̄_j
        let mut next = vec![Cdd::ZERO; k + 2];
        next[1..].copy_from_slice(&coeffs[k]);
        let mut factor = Dd::new(1.0);
        for j in (0..=k).rev() {
            if j < k {
                factor = factor * betas[j];
            }
            let f = h[j].scale(factor);
            for (o, p) in next.iter_mut().zip(&coeffs[j]) {
                *o = *o - f * *p;
            }
        }
        next[k + 1] = one;
        coeffs.push(next);
        ln_norms.push(ln_norms[k] + beta2.ln());
        ratios.push(beta2.to_f64());
        defects.push((Dd::new(params.c + k as f64 + 1.0) - beta2).to_f64());
        betas.push(beta);
    }
    let coeffs = coeffs.into_iter().map(|c| c.into_iter().map(Cdd::to_c64).collect()).collect();
    let mut basis = point_charge_basis_raw(params, ConstructionTag::Quadrature, coeffs, ln_norms, Some(ratios));
    basis.norm_defects = Some(defects);
    Ok(basis)
}

fn point_charge_basis_raw(
    p: &EnsembleParams,
    tag: ConstructionTag,
    coeffs: Vec<Vec<Complex64>>,
    ln_norms: Vec<f64>,
    norm_ratios: Option<Vec<f64>>,
) -> OPBasis {
    let n = p.n as f64;
    let norm_ratios = norm_ratios.unwrap_or_else(|| ratios_from_logs(&ln_norms));
    OPBasis {
        params: p.clone(),
        tag,
        weight: WeightKind::PointCharge,
        scale: n.sqrt(),
        ln_kappa: -(p.c + 1.0) * n.ln(),
        center: n.sqrt() * p.a,
        coeffs,
        ln_norms,
        norm_ratios,
        norm_defects: None,
        parents: Vec::new(),
    }
}

/// Closed-form basis for c = 1 in terms of Q(k, Na²).
pub fn exact_c1_basis(a: f64, n_scale: usize, n: usize) -> Result<OPBasis> {
    if !(a > 0.0) {
        return Err(Error::InvalidParam(format!("exact c=1 basis needs a > 0, got {a}")));
    }
    let p = EnsembleParams::new(a, 1.0, n_scale)?;
    let b = p.sqrt_n() * a;
    let x = b * b;
    let lq: Vec<f64> = (1..=n + 2).map(|k| ln_upper_reg_gamma_int(k, x)).collect();
    // lq[k-1] = ln Q(k, x)
    let lb = b.ln();
    let coeffs = (0..=n)
        .map(|k| {
            (0..=k)
                .map(|j| {
                    if j == k {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(((k - j) as f64 * lb + lq[j] - lq[k]).exp(), 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let ln_norms = (0..=n).map(|k| ln_fact(k + 1) + lq[k + 1] - lq[k]).collect();
    Ok(point_charge_basis_raw(&p, ConstructionTag::ExactC1, coeffs, ln_norms, None))
}

/// Monomial basis, exact whenever a = 0 or c = 0.
pub fn radial_basis(params: &EnsembleParams, n: usize) -> Result<OPBasis> {
    check_point_charge(params)?;
    if params.a != 0.0 && params.c != 0.0 {
        return Err(Error::InvalidParam("monomials are orthogonal only for a = 0 or c = 0".into()));
    }
    let c = if params.a == 0.0 { params.c } else { 0.0 };
    let coeffs = (0..=n)
        .map(|j| {
            let mut v = vec![Complex64::new(0.0, 0.0); j + 1];
            v[j] = Complex64::new(1.0, 0.0);
            v
        })
        .collect();
    let ln_norms = (0..=n).map(|j| ln_gamma(j as f64 + c + 1.0)).collect();
    let ratios = (0..n).map(|j| j as f64 + c + 1.0).collect();
    let mut basis = point_charge_basis_raw(params, ConstructionTag::Radial, coeffs, ln_norms, Some(ratios));
    basis.norm_defects = Some(vec![0.0; n]);
    Ok(basis)
}

/// Basis for |ζ−a|^{2c} e^{−N|ζ|²}: exact constructions when one exists, else
/// the extended-precision Arnoldi basis within its work budget, else LDL of the Gram matrix.
pub fn point_charge_basis(params: &EnsembleParams, n: usize) -> Result<OPBasis> {
    check_point_charge(params)?;
    if params.a == 0.0 || params.c == 0.0 {
        radial_basis(params, n)
    } else if params.c == 1.0 {
        exact_c1_basis(params.a, params.n, n)
    } else {
        if n > DEGREE_CAP {
            return Err(Error::Unsupported(format!("quadrature basis degree {n} exceeds the cap {DEGREE_CAP}")));
        }
        if arnoldi_fits(params, n) {
            arnoldi_basis(params, n, QuadratureOptions::default())
        } else {
            let g = compute_gram(params, n + 1)?;
            monic_basis_from_gram(&g, n)
        }
    }
}

/// Scaled Hermite basis for the elliptic Ginibre weight.
pub fn hermite_elliptic_basis(tau: f64, n_scale: usize, n: usize) -> Result<OPBasis> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParam(format!("elliptic basis needs tau in (0,1), got {tau}")));
    }
    let p = EnsembleParams::elliptic(tau, n_scale)?;
    let mut coeffs: Vec<Vec<Complex64>> = Vec::with_capacity(n + 1);
    coeffs.push(vec![Complex64::new(1.0, 0.0)]);
    for j in 0..n {
        // P̄_{j+1} = u P̄_j − jτ P̄_{j−1}
        let mut next = vec![Complex64::new(0.0, 0.0); j + 2];
        for (m, c) in coeffs[j].iter().enumerate() {
            next[m + 1] += c;
        }
        if j > 0 {
            for (m, c) in coeffs[j - 1].iter().enumerate() {
                next[m] -= c * (j as f64 * tau);
            }
        }
        coeffs.push(next);
    }
    let lt = (1.0 - tau * tau).sqrt().ln();
    let ln_norms = (0..=n).map(|j| lt + ln_fact(j)).collect();
    let ns = n_scale as f64;
    Ok(OPBasis {
        params: p,
        tag: ConstructionTag::HermiteElliptic,
        weight: WeightKind::Elliptic,
        scale: ns.sqrt(),
        ln_kappa: -ns.ln(),
        center: 0.0,
        coeffs,
        ln_norms,
        norm_ratios: (1..=n).map(|j| j as f64).collect(),
        norm_defects: None,
        parents: Vec::new(),
    })
}

/// Parent charge (c+l+1)/d − 1 for residue l.
pub fn residue_charge(c: f64, l: usize, d: usize) -> f64 {
    (c + l as f64 + 1.0) / d as f64 - 1.0
}

/// Basis for |ζ|^{2c} e^{−N|ζ^d−a|²} from d point-charge parents.
///
/// Q̄_{dj+l}(u) = u^l (−1)^j P̄^{(l)}_j(b − u^d) with P̄^{(l)} the scaled
/// parent basis of charge (c+l+1)/d − 1, and h̄ = h̄^{(l)}_j / d.
/// `builder` receives the parent parameters and the parent degree.
pub fn lemniscate_child_basis<F>(params: &EnsembleParams, n: usize, builder: F) -> Result<OPBasis>
where
    F: Fn(&EnsembleParams, usize) -> Result<OPBasis>,
{
    params.validate()?;
    let d = params.d;
    let c = params.c;
    let parent_deg = n / d;
    let mut parents = Vec::with_capacity(d);
    for l in 0..d {
        let cl = residue_charge(c, l, d);
        assert!(cl > -1.0, "residue charge must exceed -1");
        let pp = EnsembleParams::new(params.a, cl, params.n)?;
        let pb = builder(&pp, parent_deg)?;
        if pb.weight != WeightKind::PointCharge || pb.degree_max() < parent_deg {
            return Err(Error::InvalidParam("parent builder returned an unsuitable basis".into()));
        }
        parents.push(Arc::new(pb));
    }
    let ns = params.n as f64;
    let b = ns.sqrt() * params.a;
    let lnd = (d as f64).ln();
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut ln_norms = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (j, l) = (k / d, k % d);
        let pc = parents[l].scaled_coeffs(j);
        // expand Σ_i p_i (b − u^d)^i, then shift by u^l and sign (−1)^j
        let mut out = vec![Complex64::new(0.0, 0.0); k + 1];
        let mut pow = vec![Complex64::new(1.0, 0.0)];
        for (i, pi) in pc.iter().enumerate() {
            if i > 0 {
                let mut next = vec![Complex64::new(0.0, 0.0); pow.len() + 1];
                for (m, v) in pow.iter().enumerate() {
                    next[m] += v * b;
                    next[m + 1] -= v;
                }
                pow = next;
            }
            for (m, v) in pow.iter().enumerate() {
                out[d * m + l] += pi * v;
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out.iter_mut().for_each(|v| *v *= sign);
        out[k] = Complex64::new(1.0, 0.0);
        coeffs.push(out);
        ln_norms.push(parents[l].scaled_ln_norm(j) - lnd);
    }
    let tag = if d == 1 { parents[0].tag } else { ConstructionTag::LemniscateChild };
    Ok(OPBasis {
        params: params.clone(),
        tag,
        weight: WeightKind::Lemniscate,
        scale: ns.powf(1.0 / (2.0 * d as f64)),
        ln_kappa: -(c + 1.0) / d as f64 * ns.ln(),
        center: b,
        coeffs,
        norm_ratios: ratios_from_logs(&ln_norms),
        norm_defects: None,
        ln_norms,
        parents,
    })
}

/// Lemniscate basis of the full size dN using [`point_charge_basis`] parents.
pub fn lemniscate_basis(params: &EnsembleParams) -> Result<OPBasis> {
    lemniscate_child_basis(params, params.d * params.n - 1, point_charge_basis)
}
