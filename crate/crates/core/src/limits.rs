//! Limiting one-point functions and kernels at the charge: bulk
//! Mittag-Leffler forms, the boundary erfc family generated by the
//! insertion recursion, the multi-fold edge assembly and the Painlevé-type
//! edge formula with a pluggable transcendental.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DensityProfile, KernelHandle, ProfileKind, Rescaling};
use crate::orthopoly::residue_charge;
use crate::params::EnsembleParams;
use crate::quadrature::integrate_adaptive_c64;
use crate::specfun::{
    erfc_complex, erfc_real, hermite_prob, lower_reg_gamma, lower_reg_gamma_real, mittag_leffler, mittag_leffler_scaled,
};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ---------------------------------------------------------------- bulk

/// G(z,w) = e^{zw̄ − |z|²/2 − |w|²/2}.
pub fn ginibre_kernel(z: Complex64, w: Complex64) -> Complex64 {
    (z * w.conj() - 0.5 * (z.norm_sqr() + w.norm_sqr())).exp()
}

/// R̂^c_bulk(z) = P(c, |z|²); 1 for c = 0.
pub fn bulk_density_hat(c: f64, z: Complex64) -> Result<f64> {
    let x = z.norm_sqr();
    if x == 0.0 && c < 0.0 {
        return Ok(f64::INFINITY);
    }
    lower_reg_gamma_real(c, x)
}

/// Mittag-Leffler form |z|^{2c} e^{−|z|²} E_{1,1+c}(|z|²).
pub fn bulk_density_hat_ml(c: f64, z: Complex64) -> Result<f64> {
    if c <= -1.0 {
        return Err(Error::Domain(format!("bulk density requires c > -1, got {c}")));
    }
    let x = z.norm_sqr();
    if x == 0.0 {
        return Ok(if c == 0.0 {
            1.0
        } else if c > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok((c * x.ln() - x).exp() * mittag_leffler(1.0, 1.0 + c, x)?)
}

/// Agreement tolerance between the two bulk forms.
pub const BULK_FORMS_TOL: f64 = 1e-10;

/// [`bulk_density_hat`] with the Mittag-Leffler form cross-checked.
pub fn bulk_density_hat_checked(c: f64, z: Complex64) -> Result<f64> {
    let p = bulk_density_hat(c, z)?;
    let m = bulk_density_hat_ml(c, z)?;
    if p.is_finite() && (p - m).abs() > BULK_FORMS_TOL * p.abs().max(1.0) {
        return Err(Error::Numeric(format!("bulk density forms disagree at {z}: P = {p}, Mittag-Leffler = {m}")));
    }
    Ok(p)
}

/// K̂^c_bulk(z,w) = G(z,w) P(c, zw̄) with the principal branch.
pub fn bulk_kernel_hat(c: f64, z: Complex64, w: Complex64) -> Result<Complex64> {
    let x = z * w.conj();
    if x.norm() == 0.0 && c < 0.0 {
        return Err(Error::Domain("bulk kernel with c < 0 is singular at zw̄ = 0".into()));
    }
    Ok(ginibre_kernel(z, w) * lower_reg_gamma(c, x)?)
}

/// R^c_bulk(z) = d|z|^{2c} e^{−|z|^{2d}} E_{1/d,(1+c)/d}(|z|²) in the
/// rescaling z = N^{1/(2d)}ζ.
pub fn bulk_density_lemniscate(d: usize, c: f64, z: Complex64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParam("d must be positive".into()));
    }
    if c <= -1.0 {
        return Err(Error::Domain(format!("bulk density requires c > -1, got {c}")));
    }
    let df = d as f64;
    let x = z.norm_sqr();
    let ml = mittag_leffler_scaled(1.0 / df, (1.0 + c) / df, x)?;
    if x == 0.0 {
        return Ok(if c == 0.0 {
            df * ml
        } else if c > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(df * (c * x.ln()).exp() * ml)
}

// ---------------------------------------------------------------- edge

/// R̂^0_edge(z) = ½ erfc(−(z + z̄ − S)/√2).
pub fn edge_density_c0(z: Complex64, s: f64) -> f64 {
    0.5 * erfc_real(-(2.0 * z.re - s) / SQRT_2)
}

/// K̂^0_edge(z,w) = G(z,w) ½ erfc(−(z + w̄ − S)/√2).
pub fn edge_kernel_c0(z: Complex64, w: Complex64, s: f64) -> Complex64 {
    ginibre_kernel(z, w) * erfc_complex(-(z + w.conj() - s) / SQRT_2) * 0.5
}

/// Holomorphic profile of a base kernel K(z,w) = e^{−|z|²/2−|w|²/2} e^{zw̄} E(z + w̄).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum BaseProfile {
    /// E ≡ 1: bulk Ginibre kernel.
    Bulk,
    /// E(x) = ½ erfc(−(x − S)/√2): boundary Ginibre kernel.
    Edge { s: f64 },
}

impl BaseProfile {
    /// i-th derivative E^{(i)}(x).
    fn deriv(&self, i: usize, x: Complex64) -> Complex64 {
        match *self {
            BaseProfile::Bulk => {
                if i == 0 {
                    cx(1.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            BaseProfile::Edge { s } => {
                if i == 0 {
                    return erfc_complex(-(x - s) / SQRT_2) * 0.5;
                }
                let t = x - s;
                let sign = if (i - 1) % 2 == 0 { 1.0 } else { -1.0 };
                hermite_prob(i - 1, t) * (-t * t * 0.5).exp() * (sign * INV_SQRT_2PI)
            }
        }
    }

    fn s(&self) -> f64 {
        match *self {
            BaseProfile::Bulk => 0.0,
            BaseProfile::Edge { s } => s,
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Limiting kernel at integer charge m obtained from the charge-free base
/// kernel by m insertion steps.
///
/// With L(z,ω) = e^{zω}E(z+ω), charge m removes the first m Taylor modes
/// at the origin: L^m = L − Σ_{k<m} w_k(z) w_k(ω)/D_k, where
/// w_k = Σ_i T_{ki} ∂_ω^i L(·,0) is the LDL frame of the jet Gram matrix
/// M_{jk} = ∂_z^j ∂_ω^k L(0,0). Each step appends one frame row, so the
/// diagonal obeys R^{m+1}(z) = R^m(z) − |K^m(0,z)|²/R^m(0) with the ratio
/// read as the limit at the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecursionState {
    pub c_base: f64,
    pub steps: usize,
    #[serde(rename = "S_crit")]
    pub s_crit: f64,
    pub base: BaseProfile,
    frame: Vec<Vec<f64>>,
    pivots: Vec<f64>,
}

impl EdgeRecursionState {
    /// Boundary Ginibre kernel at charge 0.
    pub fn new(s_crit: f64) -> Self {
        Self::with_base(BaseProfile::Edge { s: s_crit })
    }

    pub fn with_base(base: BaseProfile) -> Self {
        Self { c_base: 0.0, steps: 0, s_crit: base.s(), base, frame: Vec::new(), pivots: Vec::new() }
    }

    pub fn charge(&self) -> f64 {
        self.c_base + self.steps as f64
    }

    /// State after `m` steps.
    pub fn at_charge(s_crit: f64, m: usize) -> Result<Self> {
        let mut st = Self::new(s_crit);
        for _ in 0..m {
            st = edge_recursion_step(&st)?;
        }
        Ok(st)
    }

    /// Jet Gram entry ∂_z^j ∂_ω^k L(0,0).
    fn gram(&self, j: usize, k: usize) -> f64 {
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = 0.0;
        for n in 0..=j.min(k) {
            let e = self.base.deriv(j + k - 2 * n, zero).re;
            acc += e / (factorial(n) * factorial(j - n) * factorial(k - n));
        }
        acc * factorial(j) * factorial(k)
    }

    /// Jet v_k(z) = ∂_ω^k L(z,ω) at ω = 0.
    fn jet(&self, k: usize, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=k {
            acc += self.base.deriv(i, z) * z.powu((k - i) as u32) * binom(k, i);
        }
        acc
    }

    fn jets(&self, n: usize, z: Complex64) -> Vec<Complex64> {
        (0..n).map(|k| self.jet(k, z)).collect()
    }

    fn frame_value(row: &[f64], jets: &[Complex64]) -> Complex64 {
        row.iter().zip(jets).map(|(t, v)| v * t).sum()
    }

    /// Frame row and pivot of the next step, from jets of the current state.
    fn next_row(&self) -> (Vec<f64>, f64) {
        let m = self.steps;
        let mut row = vec![0.0; m + 1];
        row[m] = 1.0;
        for (k, tk) in self.frame.iter().enumerate() {
            // ⟨v_m, w_k⟩ = Σ_i T_{ki} M_{m i}
            let proj: f64 = tk.iter().enumerate().map(|(i, t)| t * self.gram(m, i)).sum();
            let coef = proj / self.pivots[k];
            for (i, t) in tk.iter().enumerate() {
                row[i] -= coef * t;
            }
        }
        let mut pivot = 0.0;
        for i in 0..=m {
            for j in 0..=m {
                pivot += row[i] * row[j] * self.gram(i, j);
            }
        }
        (row, pivot)
    }

    /// e^{−|z|²/2} Σ_k w_k(z) / √D_k terms, as a vector.
    fn frame_features(&self, z: Complex64) -> Vec<Complex64> {
        let jets = self.jets(self.steps, z);
        let g = (-0.5 * z.norm_sqr()).exp();
        self.frame.iter().zip(&self.pivots).map(|(row, d)| Self::frame_value(row, &jets) * (g / d.sqrt())).collect()
    }

    /// K̂^m(z,w).
    pub fn kernel(&self, z: Complex64, w: Complex64) -> Complex64 {
        let s = self.base.s();
        let e = match self.base {
            BaseProfile::Bulk => cx(1.0),
            BaseProfile::Edge { .. } => erfc_complex(-(z + w.conj() - s) / SQRT_2) * 0.5,
        };
        let fz = self.frame_features(z);
        let fw = if z == w { fz.clone() } else { self.frame_features(w) };
        let sub: Complex64 = fz.iter().zip(&fw).map(|(a, b)| a * b.conj()).sum();
        ginibre_kernel(z, w) * e - sub
    }

    /// R̂^m(z).
    pub fn density(&self, z: Complex64) -> f64 {
        let base = match self.base {
            BaseProfile::Bulk => 1.0,
            BaseProfile::Edge { s } => edge_density_c0(z, s),
        };
        base - self.frame_features(z).iter().map(|f| f.norm_sqr()).sum::<f64>()
    }

    /// |K̂^m(0,z)|²/R̂^m(0), read as the limit at the origin, computed from
    /// the current state's own jets.
    pub fn berezin_at_origin(&self, z: Complex64) -> Result<f64> {
        let (row, pivot) = self.next_row();
        if !(pivot > 0.0) {
            return Err(Error::Domain(format!("reduced density vanishes at the origin at charge {}", self.charge())));
        }
        let jets = self.jets(self.steps + 1, z);
        let w = Self::frame_value(&row, &jets);
        Ok((-z.norm_sqr()).exp() * w.norm_sqr() / pivot)
    }

    /// Diagonal on a grid, evaluated in parallel.
    pub fn density_profile(&self, grid: &[Complex64], params: EnsembleParams) -> DensityProfile {
        DensityProfile {
            grid: grid.to_vec(),
            values: grid.par_iter().map(|z| self.density(*z)).collect(),
            params,
            kind: match self.base {
                BaseProfile::Bulk => ProfileKind::LimitBulk,
                BaseProfile::Edge { .. } => ProfileKind::LimitEdge,
            },
            rescaling: Rescaling::Origin,
            n_terms: None,
        }
    }
}

/// One insertion step: charge m to m + 1.
pub fn edge_recursion_step(state: &EdgeRecursionState) -> Result<EdgeRecursionState> {
    let (row, pivot) = state.next_row();
    // relative to the jet Gram diagonal, below which the pivot is noise
    let scale = state.gram(state.steps, state.steps).abs().max(f64::MIN_POSITIVE);
    if !(pivot > 1e-13 * scale) {
        return Err(Error::Domain(format!(
            "reduced density at the origin is {pivot:e} at charge {}; the recursion cannot proceed",
            state.charge()
        )));
    }
    let mut next = state.clone();
    next.frame.push(row);
    next.pivots.push(pivot);
    next.steps += 1;
    Ok(next)
}

/// R̂^1_edge at S = 0 in closed form.
pub fn edge_density_c1_closed(z: Complex64) -> f64 {
    let e = erfc_complex(-z / SQRT_2);
    0.5 * erfc_real(-2.0 * z.re / SQRT_2) - 0.5 * (-z.norm_sqr()).exp() * e.norm_sqr()
}

/// R̂^2_edge at S = 0 in closed form.
pub fn edge_density_c2_closed(z: Complex64) -> f64 {
    let e = erfc_complex(-z / SQRT_2);
    let t = (z * (PI / 2.0).sqrt() - 1.0) * e + (-z * z * 0.5).exp();
    edge_density_c1_closed(z) - (-z.norm_sqr()).exp() * t.norm_sqr() / (PI - 2.0)
}

// ------------------------------------------------------- multi-fold edge

/// How the d-fold edge density obtains its parent densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LemniscateMode {
    /// Integer parent charges through the insertion recursion.
    ClosedFormInteger,
    /// Finite-N point-charge kernels at the critical charge location.
    FiniteN {
        #[serde(rename = "N")]
        n: usize,
    },
}

/// Parent densities R̂^{c_l} for the d-fold assembly.
enum Parents {
    Limit(Vec<EdgeRecursionState>),
    Finite(Vec<KernelHandle>),
}

/// Evaluator for R^c_edge(z) = d|z|^{2d−2} Σ_l R̂^{(c−l)/d}_edge(z^d).
pub struct LemniscateEdge {
    d: usize,
    parents: Parents,
}

impl LemniscateEdge {
    pub fn new(d: usize, c: f64, s: f64, mode: LemniscateMode) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParam("d must be positive".into()));
        }
        if c <= -1.0 {
            return Err(Error::InvalidParam(format!("c must exceed -1, got {c}")));
        }
        let charges: Vec<f64> = (0..d).map(|l| residue_charge(c, l, d)).collect();
        let parents = match mode {
            LemniscateMode::ClosedFormInteger => {
                let bad: Vec<String> = charges
                    .iter()
                    .filter(|cl| !(**cl >= 0.0 && (cl.round() - **cl).abs() < 1e-12))
                    .map(|cl| format!("{cl}"))
                    .collect();
                if !bad.is_empty() {
                    return Err(Error::Unsupported(format!(
                        "closed-form edge densities need nonnegative integer charges; got {} \
                         (fractional charges require a Painlevé transcendental or finite_N mode)",
                        bad.join(", ")
                    )));
                }
                let states = charges
                    .iter()
                    .map(|cl| EdgeRecursionState::at_charge(s, cl.round() as usize))
                    .collect::<Result<Vec<_>>>()?;
                Parents::Limit(states)
            }
            LemniscateMode::FiniteN { n } => {
                let handles = charges
                    .iter()
                    .map(|cl| KernelHandle::hat(&EnsembleParams::critical(*cl, n, s)?))
                    .collect::<Result<Vec<_>>>()?;
                Parents::Finite(handles)
            }
        };
        Ok(Self { d, parents })
    }

    pub fn density(&self, z: Complex64) -> Result<f64> {
        let zd = z.powu(self.d as u32);
        let sum = match &self.parents {
            Parents::Limit(states) => states.iter().map(|st| st.density(zd)).sum::<f64>(),
            Parents::Finite(hs) => {
                let mut acc = 0.0;
                for h in hs {
                    acc += h.rescaled_density(zd, Rescaling::Origin)?;
                }
                acc
            }
        };
        if self.d == 1 {
            return Ok(sum);
        }
        Ok(self.d as f64 * z.norm().powi(2 * self.d as i32 - 2) * sum)
    }

    pub fn profile(&self, grid: &[Complex64]) -> Result<Vec<f64>> {
        grid.par_iter().map(|z| self.density(*z)).collect()
    }
}

/// Single-point d-fold edge density.
pub fn lemniscate_edge_density(d: usize, c: f64, z: Complex64, s: f64, mode: LemniscateMode) -> Result<f64> {
    LemniscateEdge::new(d, c, s, mode)?.density(z)
}

// ------------------------------------------------ finite-N convergence

/// Points on a polar grid of the closed disc |z| ≤ radius, including 0.
pub fn disc_grid(radius: f64, n_r: usize, n_theta: usize) -> Vec<Complex64> {
    let mut g = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=n_r {
        let r = radius * i as f64 / n_r as f64;
        for k in 0..n_theta {
            g.push(Complex64::from_polar(r, 2.0 * PI * k as f64 / n_theta as f64));
        }
    }
    g
}

/// sup over `grid` of |R̂_N^c(z) − P(c,|z|²)| for the charge at a.
pub fn bulk_convergence_sup(c: f64, a: f64, n: usize, grid: &[Complex64]) -> Result<f64> {
    let h = KernelHandle::hat(&EnsembleParams::new(a, c, n)?)?;
    let devs = grid
        .par_iter()
        .map(|z| Ok((h.rescaled_density(*z, Rescaling::Origin)? - bulk_density_hat(c, *z)?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Finite-N edge profile R̂_N^c at the critical location a = 1 + S/(2√N).
pub fn finite_n_edge_profile(c: f64, n: usize, s: f64, grid: &[Complex64]) -> Result<DensityProfile> {
    KernelHandle::hat(&EnsembleParams::critical(c, n, s)?)?.density_profile(grid, Rescaling::Origin)
}

/// sup over `grid` of |R̂_N^0(z) − ½ erfc(−(z+z̄−S)/√2)|.
pub fn edge_convergence_sup(n: usize, s: f64, grid: &[Complex64]) -> Result<f64> {
    let p = finite_n_edge_profile(0.0, n, s, grid)?;
    Ok(p.grid.iter().zip(&p.values).map(|(z, v)| (v - edge_density_c0(*z, s)).abs()).fold(0.0, f64::max))
}

// ------------------------------------------------ Painlevé-type formula

/// Scalar transcendental 𝓕_c(·; S) of a complex argument.
pub trait PainleveHandle: Send + Sync {
    fn value(&self, w: Complex64) -> Result<Complex64>;

    /// Derivative of w ↦ 𝓕_c(w), if known in closed form.
    fn derivative(&self, _w: Complex64) -> Option<Result<Complex64>> {
        None
    }
}

/// The zero map.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHandle;

impl PainleveHandle for ZeroHandle {
    fn value(&self, _w: Complex64) -> Result<Complex64> {
        Ok(Complex64::new(0.0, 0.0))
    }

    fn derivative(&self, _w: Complex64) -> Option<Result<Complex64>> {
        Some(Ok(Complex64::new(0.0, 0.0)))
    }
}

/// Mock 𝓕(ζ) = e^{−ζ²/4 + σζ/2} (−ζ)^{−c/2} with σ = 2 − S.
///
/// The bracketed prefactor reduces to −(S+σ)/2 · 𝓕(−z) and the integral
/// to a Gaussian, so the formula evaluates to C·(−√(2π))e^{δ²/2}·½erfc(−(z+z̄−δ)/√2)
/// with δ = (S−σ)/2 = S − 1. Used to test the plumbing.
#[derive(Debug, Clone, Copy)]
pub struct MockHandle {
    pub c: f64,
    pub s: f64,
}

impl MockHandle {
    pub fn new(c: f64, s: f64) -> Self {
        Self { c, s }
    }

    fn sigma(&self) -> f64 {
        2.0 - self.s
    }

    fn delta(&self) -> f64 {
        0.5 * (self.s - self.sigma())
    }

    /// Normalization constant making the formula tend to 1.
    pub fn exact_c(&self) -> f64 {
        -(-0.5 * self.delta().powi(2)).exp() / (2.0 * PI).sqrt()
    }

    /// Value of the formula with C = [`Self::exact_c`].
    pub fn exact_density(&self, z: Complex64) -> f64 {
        edge_density_c0(z, self.delta())
    }
}

impl PainleveHandle for MockHandle {
    fn value(&self, w: Complex64) -> Result<Complex64> {
        let e = (-w * w * 0.25 + w * (0.5 * self.sigma())).exp();
        Ok(e * (-w).powc(cx(-0.5 * self.c)))
    }

    fn derivative(&self, w: Complex64) -> Option<Result<Complex64>> {
        let f = match self.value(w) {
            Ok(f) => f,
            Err(e) => return Some(Err(e)),
        };
        Some(Ok(f * (-w * 0.5 + 0.5 * self.sigma() - self.c * 0.5 / w)))
    }
}

/// 𝓕 tabulated on a real grid, interpolated by local cubics.
#[derive(Debug, Clone)]
pub struct TabulatedHandle {
    xs: Vec<f64>,
    ys: Vec<Complex64>,
}

impl TabulatedHandle {
    pub fn new(xs: Vec<f64>, ys: Vec<Complex64>) -> Result<Self> {
        if xs.len() < 4 || xs.len() != ys.len() {
            return Err(Error::InvalidParam("tabulated handle needs at least 4 matching samples".into()));
        }
        if xs.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidParam("tabulated abscissae must increase strictly".into()));
        }
        Ok(Self { xs, ys })
    }

    /// CSV rows `w, re, im`; a non-numeric first line is taken as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => {
                    xs.push(v[0]);
                    ys.push(Complex64::new(v[1], v[2]));
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::InvalidParam(format!(
                        "line {} of {}: expected three numbers",
                        i + 1,
                        path.display()
                    )))
                }
            }
        }
        Self::new(xs, ys)
    }

    /// Stencil start and Lagrange basis (values, derivatives) at x.
    fn stencil(&self, x: f64) -> Result<(usize, [f64; 4], [f64; 4])> {
        let n = self.xs.len();
        if !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return Err(Error::Domain(format!(
                "tabulated handle covers [{}, {}], asked for {x}",
                self.xs[0],
                self.xs[n - 1]
            )));
        }
        let i = self.xs.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let s = i.saturating_sub(1).min(n - 4);
        let t = &self.xs[s..s + 4];
        let mut l = [0.0; 4];
        let mut dl = [0.0; 4];
        for j in 0..4 {
            let mut den = 1.0;
            for m in 0..4 {
                if m != j {
                    den *= t[j] - t[m];
                }
            }
            let mut p = 1.0;
            let mut dp = 0.0;
            for m in 0..4 {
                if m != j {
                    dp = dp * (x - t[m]) + p;
                    p *= x - t[m];
                }
            }
            l[j] = p / den;
            dl[j] = dp / den;
        }
        Ok((s, l, dl))
    }

    fn real_arg(w: Complex64) -> Result<f64> {
        if w.im.abs() > 1e-12 * w.re.abs().max(1.0) {
            return Err(Error::Unsupported("tabulated handle is defined on the real axis only".into()));
        }
        Ok(w.re)
    }
}

impl PainleveHandle for TabulatedHandle {
    fn value(&self, w: Complex64) -> Result<Complex64> {
        let (s, l, _) = self.stencil(Self::real_arg(w)?)?;
        Ok((0..4).map(|j| self.ys[s + j] * l[j]).sum())
    }

    fn derivative(&self, w: Complex64) -> Option<Result<Complex64>> {
        Some(
            Self::real_arg(w)
                .and_then(|x| self.stencil(x))
                .map(|(s, _, dl)| (0..4).map(|j| self.ys[s + j] * dl[j]).sum()),
        )
    }
}

/// Inputs of the Painlevé-type edge formula for c ∈ (−1, 0).
#[derive(Clone)]
pub struct PainleveInput {
    pub handle: Arc<dyn PainleveHandle>,
    pub c: f64,
    pub s_crit: f64,
    pub c_const: Option<f64>,
}

impl std::fmt::Debug for PainleveInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PainleveInput")
            .field("c", &self.c)
            .field("s_crit", &self.s_crit)
            .field("c_const", &self.c_const)
            .finish_non_exhaustive()
    }
}

impl PainleveInput {
    pub fn new(handle: Arc<dyn PainleveHandle>, c: f64, s_crit: f64) -> Result<Self> {
        if !(c > -1.0 && c < 0.0) {
            return Err(Error::InvalidParam(format!("the Painlevé formula needs c in (-1, 0), got {c}")));
        }
        Ok(Self { handle, c, s_crit, c_const: None })
    }

    pub fn with_c_const(mut self, c_const: f64) -> Self {
        self.c_const = Some(c_const);
        self
    }
}

/// Formula value with its imaginary part kept as a diagnostic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PainleveValue {
    pub value: f64,
    pub imag_residual: f64,
}

/// Default left end of the contour: Re w = −(40 + |z|²).
pub fn default_contour_start(z: Complex64) -> f64 {
    -(40.0 + z.norm_sqr())
}

fn handle_derivative(h: &dyn PainleveHandle, w: Complex64) -> Result<Complex64> {
    if let Some(d) = h.derivative(w) {
        return d;
    }
    // central differences with one Richardson step
    let step = |e: f64| -> Result<Complex64> { Ok((h.value(w + e)? - h.value(w - e)?) / (2.0 * e)) };
    let e = 1e-3 * w.norm().max(1.0);
    let d1 = step(e)?;
    let d2 = step(0.5 * e)?;
    Ok((d2 * 4.0 - d1) / 3.0)
}

/// The formula with a given constant, before taking the real part.
fn painleve_raw(input: &PainleveInput, c_const: f64, z: Complex64) -> Result<Complex64> {
    let (c, s) = (input.c, input.s_crit);
    if z.norm() == 0.0 {
        return Err(Error::Domain("the Painlevé formula is singular at z = 0".into()));
    }
    let h = input.handle.as_ref();
    let f = h.value(-z)?;
    let fp = handle_derivative(h, -z)?;
    let bracket = ((z - s) * 0.5 + c / (2.0 * z)) * f - fp;
    if bracket.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let half_c = cx(0.5 * c);
    let pref = bracket * (-(z * z - 2.0 * s * z) * 0.25).exp() * z.powc(half_c);

    // horizontal path w = x + i·Im z̄ from the contour start to z̄
    let y = -z.im;
    let x_end = z.re;
    let x_start = default_contour_start(z);
    let integrand = |x: f64| -> Complex64 {
        let w = Complex64::new(x, y);
        match h.value(-w) {
            Ok(fw) => (-z * w - (w * w - 2.0 * s * w) * 0.25).exp() * w.powc(half_c) * fw,
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    };
    // magnitude scale for a relative tolerance
    let n_probe = 400;
    let scale = (0..=n_probe)
        .map(|i| integrand(x_start + (x_end - x_start) * i as f64 / n_probe as f64).norm())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        * (x_end - x_start);
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    // split at the branch point when the path runs through it
    let mut cuts = vec![x_start];
    if y == 0.0 && x_start < 0.0 && x_end > 0.0 {
        cuts.push(0.0);
    }
    cuts.push(x_end);
    let mut integral = Complex64::new(0.0, 0.0);
    for p in cuts.windows(2) {
        let part = integrate_adaptive_c64(&integrand, p[0], p[1], tol, 48)?;
        integral += part;
    }
    if !(integral.re.is_finite() && integral.im.is_finite()) {
        return Err(Error::Numeric(format!("contour integral is not finite at z = {z}")));
    }
    Ok(pref * integral * c_const)
}

/// R̂^c_edge(z) from the formula; needs the normalization constant.
pub fn edge_from_painleve(input: &PainleveInput, z: Complex64) -> Result<PainleveValue> {
    let c_const =
        input.c_const.ok_or_else(|| Error::State("normalization constant unset; call normalize_c first".into()))?;
    let v = painleve_raw(input, c_const, z)?;
    Ok(PainleveValue { value: v.re, imag_residual: v.im })
}

/// Value at `probe` with C = 1 (the formula is linear in C).
pub fn painleve_unnormalized(input: &PainleveInput, probe: Complex64) -> Result<Complex64> {
    painleve_raw(input, 1.0, probe)
}

/// Default real probe for [`normalize_c`].
pub const NORMALIZE_PROBE: f64 = 8.0;
/// Allowed drift of the normalized formula between the probe and probe + 2.
pub const NORMALIZE_STABILITY: f64 = 1e-3;

/// C such that the formula equals 1 at z = probe_re, checked at probe_re + 2.
pub fn normalize_c(input: &PainleveInput, probe_re: f64) -> Result<f64> {
    let raw = painleve_unnormalized(input, cx(probe_re))?;
    if !(raw.re.is_finite()) || raw.re.abs() < 1e-300 {
        return Err(Error::Numeric(format!(
            "no finite normalization: unnormalized value {raw} at the probe {probe_re}"
        )));
    }
    let c_const = 1.0 / raw.re;
    let check = painleve_raw(input, c_const, cx(probe_re + 2.0))?;
    if !((check.re - 1.0).abs() <= NORMALIZE_STABILITY) {
        return Err(Error::Numeric(format!(
            "normalization unstable: value {} at {} after fixing 1 at {probe_re}",
            check.re,
            probe_re + 2.0
        )));
    }
    Ok(c_const)
}
