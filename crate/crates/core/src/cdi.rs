//! Recurrence matrices and Christoffel–Darboux identities.
//!
//! Everything is computed in the scaled variable u = s·ζ of the basis and
//! converted to physical units at the end: L_{jk} = s^{k−j} L̄,
//! U_{jk} = s^{j−k} Ū, A_{jk} = s^{j+1−k} Ā and B_{jk} = s^{k−j−1} B̄.
//! Integration by parts gives Ā(I+L̄*) = k̄ (I+Ū) B̄* in scaled form, with
//! k̄ = 1 for the point-charge weight and 1/(1−τ²) for the elliptic weight.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{relative_residual, IdentityCheck};
use crate::linalg::{smallest_singular_value, CMatrix};
use crate::orthopoly::{
    charge_power, compute_gram, gram_integer_charge, hermite_elliptic_basis, horner_split, point_charge_basis,
    ConstructionTag, OPBasis, Scaled, WeightKind, DEGREE_CAP,
};
use crate::params::EnsembleParams;
use crate::specfun::{ln_gamma, ln_upper_reg_gamma_int};
use crate::sum::ComplexNeumaier;

/// Default relative threshold for flagging a degenerate row.
pub const DEGENERATE_TOL: f64 = 1e-10;

/// Pass thresholds used by the verification reports.
pub const RELATION_TOL: f64 = 1e-8;
pub const ACTION_TOL: f64 = 1e-7;
pub const IDENTITY_TOL: f64 = 1e-6;
pub const ELLIPTIC_TOL: f64 = 1e-9;

type Poly = Vec<Complex64>;

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

// Split-form arithmetic.

fn split(z: Complex64) -> Scaled {
    let r = z.norm();
    if r == 0.0 || !r.is_finite() {
        Scaled { mant: z, ln_scale: 0.0 }
    } else {
        Scaled { mant: z / r, ln_scale: r.ln() }
    }
}

fn smul(a: Scaled, b: Scaled) -> Scaled {
    if a.is_zero() || b.is_zero() {
        return Scaled::ZERO;
    }
    Scaled { mant: a.mant * b.mant, ln_scale: a.ln_scale + b.ln_scale }
}

fn sconj(a: Scaled) -> Scaled {
    Scaled { mant: a.mant.conj(), ln_scale: a.ln_scale }
}

fn sneg(a: Scaled) -> Scaled {
    Scaled { mant: -a.mant, ln_scale: a.ln_scale }
}

fn sshift(a: Scaled, ln: f64) -> Scaled {
    Scaled { mant: a.mant, ln_scale: a.ln_scale + ln }
}

fn sdiv(a: Scaled, b: Scaled) -> Result<Scaled> {
    if b.is_zero() {
        return Err(Error::Numeric("division by zero in identity evaluation".into()));
    }
    Ok(Scaled { mant: a.mant / b.mant, ln_scale: a.ln_scale - b.ln_scale })
}

fn sexp(g: Complex64) -> Scaled {
    Scaled { mant: Complex64::from_polar(1.0, g.im), ln_scale: g.re }
}

/// Compensated sum, taken from the last term to the first.
fn ssum(terms: &[Scaled]) -> Scaled {
    let top = terms.iter().filter(|t| !t.is_zero()).map(|t| t.ln_scale).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Scaled::ZERO;
    }
    let mut acc = ComplexNeumaier::new();
    for t in terms.iter().rev() {
        if !t.is_zero() {
            acc.add(t.mant * (t.ln_scale - top).exp());
        }
    }
    Scaled { mant: acc.value(), ln_scale: top }
}

// Polynomial helpers, coefficients lowest degree first.

fn horner(p: &[Complex64], u: Complex64) -> Complex64 {
    p.iter().rev().fold(cr(0.0), |acc, c| acc * u + c)
}

fn derivative(p: &[Complex64]) -> Poly {
    p.iter().enumerate().skip(1).map(|(m, c)| c * m as f64).collect()
}

/// Quotient of p by (u − b), remainder dropped.
fn quotient_linear(p: &[Complex64], b: f64) -> Poly {
    let n = p.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut q = vec![cr(0.0); n - 1];
    q[n - 2] = p[n - 1];
    for k in (1..n - 1).rev() {
        q[k - 1] = p[k] + q[k] * b;
    }
    q
}

fn times_u(p: &[Complex64]) -> Poly {
    let mut out = vec![cr(0.0); p.len() + 1];
    out[1..].copy_from_slice(p);
    out
}

fn axpy(acc: &mut Poly, alpha: Complex64, p: &[Complex64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), cr(0.0));
    }
    for (a, c) in acc.iter_mut().zip(p) {
        *a += alpha * c;
    }
}

/// Expansion coefficients of r in the monic basis, peeled from the top degree.
fn peel(mut r: Poly, basis: &OPBasis) -> Poly {
    while r.len() > 1 && r.last().is_some_and(|c| c.norm() == 0.0) {
        r.pop();
    }
    let mut alpha = vec![cr(0.0); r.len()];
    for k in (0..r.len()).rev() {
        let a = r[k];
        alpha[k] = a;
        if a.norm() == 0.0 {
            continue;
        }
        for (m, c) in basis.scaled_coeffs(k).iter().enumerate() {
            r[m] -= a * c;
        }
    }
    alpha
}

fn ln_fact(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyKind {
    /// ⟨ζψ_j|φ_0⟩ = 0 at row `index`.
    PsiInnerZero,
    /// P_j(a) = 0 at row `index`.
    PhiAtAZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneracyFlag {
    pub index: usize,
    pub kind: DegeneracyKind,
}

/// Raw degeneracy data of a point-charge basis.
#[derive(Debug, Clone)]
struct Detection {
    /// S_j = ⟨uP̄_j, 1⟩ for j < len.
    s: Vec<Complex64>,
    psi_zero: Vec<bool>,
    /// P̄_j(b) for j < len.
    pb: Vec<Complex64>,
    phi_zero: Vec<bool>,
}

impl Detection {
    fn flags(&self, rows: usize) -> Vec<DegeneracyFlag> {
        let mut out = Vec::new();
        for j in 0..rows.min(self.s.len()) {
            if self.psi_zero[j] {
                out.push(DegeneracyFlag { index: j, kind: DegeneracyKind::PsiInnerZero });
            }
            if self.phi_zero[j] {
                out.push(DegeneracyFlag { index: j, kind: DegeneracyKind::PhiAtAZero });
            }
        }
        out
    }
}

/// Scaled moments M̄_{m,0} and M̄_{m,m} for m < size.
fn moments(basis: &OPBasis, size: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let p = basis.params();
    let gram = match basis.tag() {
        ConstructionTag::Quadrature => compute_gram(p, basis.len().max(size))?,
        ConstructionTag::ExactC1 => gram_integer_charge(p, size)?,
        ConstructionTag::Radial => {
            let c = if p.a == 0.0 { p.c } else { 0.0 };
            if c.fract() != 0.0 || c < 0.0 {
                let m0 = (0..size).map(|m| if m == 0 { cr(ln_gamma(c + 1.0).exp()) } else { cr(0.0) }).collect();
                let diag = (0..size).map(|m| ln_gamma(m as f64 + c + 1.0).exp()).collect();
                return Ok((m0, diag));
            }
            gram_integer_charge(&p.clone().with_c(c)?, size)?
        }
        _ => return Err(Error::Unsupported("moments are defined for point-charge bases only".into())),
    };
    let m0 = (0..size).map(|m| gram.scaled_entry(m, 0)).collect();
    let diag = (0..size).map(|m| gram.scaled_entry(m, m).re).collect();
    Ok((m0, diag))
}

fn detect(basis: &OPBasis, tol: f64) -> Result<Detection> {
    let n = basis.len();
    let b = basis.scaled_center();
    // the Gram matrix the basis was built from: S_j is available for j ≤ n−2
    let (m0, diag) = moments(basis, n)?;
    let mut s = Vec::with_capacity(n);
    let mut psi_zero = Vec::with_capacity(n);
    let mut pb = Vec::with_capacity(n);
    let mut phi_zero = Vec::with_capacity(n);
    for j in 0..n {
        let cs = basis.scaled_coeffs(j);
        if j + 1 < n {
            let mut acc = ComplexNeumaier::new();
            let mut scale = 0.0;
            for (m, c) in cs.iter().enumerate() {
                acc.add(c * m0[m + 1]);
                scale += c.norm() * (diag[m + 1] * diag[0]).sqrt();
            }
            let sj = acc.value();
            s.push(sj);
            psi_zero.push(sj.norm() <= tol * scale);
        } else {
            s.push(Complex64::new(f64::NAN, 0.0));
            psi_zero.push(false);
        }
        let v = horner(cs, cr(b));
        let vscale: f64 = cs.iter().enumerate().map(|(m, c)| c.norm() * b.abs().powi(m as i32)).sum();
        pb.push(v);
        phi_zero.push(j > 0 && v.norm() <= tol * vscale);
    }
    Ok(Detection { s, psi_zero, pb, phi_zero })
}

/// Degeneracy flags of a point-charge basis on rows 0..rows.
pub fn detect_degeneracies(basis: &OPBasis, rows: usize, tol: f64) -> Result<Vec<DegeneracyFlag>> {
    if basis.weight() != WeightKind::PointCharge {
        return Ok(Vec::new());
    }
    Ok(detect(basis, tol)?.flags(rows))
}

/// Truncated recurrence matrices of a basis.
///
/// `a`, `b`, `l`, `u` hold physical entries; the `_bar` fields hold the
/// scaled entries they were converted from.
#[derive(Debug, Clone)]
pub struct RecurrenceMatrices {
    pub size: usize,
    pub a: CMatrix,
    pub b: CMatrix,
    pub l: CMatrix,
    pub u: CMatrix,
    pub a_bar: CMatrix,
    pub b_bar: CMatrix,
    pub l_bar: CMatrix,
    pub u_bar: CMatrix,
    pub degeneracy_flags: Vec<DegeneracyFlag>,
    pub tol_degenerate: f64,
    /// Variable scale s.
    pub scale: f64,
    /// Physical weight scale: N, or N/(1−τ²) for the elliptic weight.
    pub weight_scale: f64,
    /// Largest discarded expansion coefficient relative to the kept ones.
    pub peel_residual: f64,
    weight: WeightKind,
    charge: f64,
    center: f64,
    ln_norms: Vec<f64>,
    /// Relative gaps |(c+j+1)h̄_j − h̄_{j+1}| / max(..) and whether they are exact.
    gaps: Vec<f64>,
    gaps_exact: bool,
    /// Rows j whose U entry skips to column i > j+1.
    skips: Vec<(usize, usize)>,
    /// Ū_{j,i} for all rows, including targets beyond the window.
    u_rows: Vec<Vec<(usize, Complex64)>>,
}

/// Matrices for a basis covering degrees 0..size+1, with degenerate rows
/// handled by skip entries.
pub fn build_matrices(basis: &OPBasis, size: usize, tol: f64) -> Result<RecurrenceMatrices> {
    build(basis, size, tol, true)
}

/// Matrices for the non-degenerate case; any flagged row is an error.
pub fn build_matrices_nondegenerate(basis: &OPBasis, size: usize, tol: f64) -> Result<RecurrenceMatrices> {
    build(basis, size, tol, false)
}

fn build(basis: &OPBasis, size: usize, tol: f64, allow_degenerate: bool) -> Result<RecurrenceMatrices> {
    if size == 0 {
        return Err(Error::InvalidParam("matrix size must be at least 1".into()));
    }
    if basis.len() < size + 2 {
        return Err(Error::InvalidParam(format!(
            "basis must cover degrees 0..{}; it stops at {}",
            size + 1,
            basis.degree_max()
        )));
    }
    match basis.weight() {
        WeightKind::PointCharge => build_point_charge(basis, size, tol, allow_degenerate),
        WeightKind::Elliptic => Ok(build_elliptic(basis, size, tol)),
        WeightKind::Lemniscate => {
            Err(Error::Unsupported("recurrence matrices are built for point-charge and elliptic bases".into()))
        }
    }
}

fn build_point_charge(basis: &OPBasis, size: usize, tol: f64, allow_degenerate: bool) -> Result<RecurrenceMatrices> {
    let p = basis.params();
    if p.a == 0.0 {
        return Err(Error::Unsupported("a = 0: every row is degenerate and the recurrence chain has no anchor".into()));
    }
    let c = p.c;
    let b = basis.scaled_center();
    let len = basis.len();
    let ln_h = basis.scaled_ln_norms();
    let det = detect(basis, tol)?;
    let flags = det.flags(size + 2);
    if !allow_degenerate {
        if let Some(f) = flags.first() {
            return Err(Error::Degenerate { row: f.index, kind: format!("{:?}", f.kind) });
        }
    }

    // L: u(ψ_j + L_{jk}ψ_k) ⊥ φ_0 with k the nearest non-degenerate row below j.
    let mut l_bar = CMatrix::zeros(size, size);
    let mut l_link: Vec<Option<(usize, Complex64)>> = vec![None; size];
    for j in 1..size {
        if det.psi_zero[j] {
            continue;
        }
        let k = (0..j)
            .rev()
            .find(|&k| !det.psi_zero[k])
            .ok_or_else(|| Error::Unsupported(format!("rows 0..{j} all have ⟨ζψ|φ_0⟩ = 0; no anchor for row {j}")))?;
        let v = -det.s[j] / det.s[k];
        l_bar[(j, k)] = v;
        l_link[j] = Some((k, v));
    }

    // B by peeling u(P̄_j + L̄ P̄_k) − P̄_{j+1}.
    let mut b_bar = CMatrix::zeros(size, size);
    let mut peel_residual: f64 = 0.0;
    for j in 0..size {
        let mut base: Poly = basis.scaled_coeffs(j).to_vec();
        if let Some((k, v)) = l_link[j] {
            axpy(&mut base, v, basis.scaled_coeffs(k));
        }
        let mut r = times_u(&base);
        axpy(&mut r, cr(-1.0), basis.scaled_coeffs(j + 1));
        let alpha = peel(r, basis);
        let keep_from = l_link[j].map_or(j, |(k, _)| k + 1);
        if j + 1 < size {
            b_bar[(j, j + 1)] = cr(1.0);
        }
        peel_residual = peel_residual.max(dropped(&alpha, keep_from, |m| 0.5 * ln_h[m]));
        for (m, a) in alpha.iter().enumerate().skip(keep_from) {
            if m < size {
                b_bar[(j, m)] = *a;
            }
        }
    }

    // U: ∂(φ_j + Ū_{ji} φ_i) has no pole at b, with i the next row with P̄_i(b) ≠ 0.
    let mut u_rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); size];
    let mut skips = Vec::new();
    for j in 0..size {
        if det.phi_zero[j] {
            continue;
        }
        let i = (j + 1..len).find(|&i| !det.phi_zero[i]).ok_or_else(|| {
            Error::Unsupported(format!(
                "rows {}..{} all have P_j(a) = 0; the run reaches the truncation edge",
                j + 1,
                len - 1
            ))
        })?;
        let v = -(ln_h[i] - ln_h[j]).exp() * det.pb[j] / det.pb[i];
        u_rows[j].push((i, v));
        if i > j + 1 {
            skips.push((j, i));
        }
    }
    let mut u_bar = CMatrix::zeros(size, size);
    for (j, row) in u_rows.iter().enumerate() {
        for &(i, v) in row {
            if i < size {
                u_bar[(j, i)] = v;
            }
        }
    }

    // A: closed forms on regular rows, peeling on rows touched by a skip.
    let mut a_bar = CMatrix::zeros(size, size);
    for j in 0..size {
        let regular = !det.phi_zero[j] && u_rows[j].first().is_some_and(|&(i, _)| i == j + 1);
        if regular {
            a_bar[(j, j)] = -(det.pb[j] / det.pb[j + 1]) * (c + j as f64 + 1.0);
            if j > 0 {
                a_bar[(j, j - 1)] = cr(1.0);
            }
            continue;
        }
        let mut d: Poly = Vec::new();
        let mut terms = vec![(j, cr(1.0))];
        terms.extend(u_rows[j].iter().copied());
        for (i, beta) in terms {
            let w = beta * (ln_h[j] - ln_h[i]).exp();
            let pc = basis.scaled_coeffs(i);
            axpy(&mut d, w, &derivative(pc));
            if c != 0.0 {
                axpy(&mut d, w * c, &quotient_linear(pc, b));
            }
        }
        let alpha = peel(d, basis);
        let keep_from = j.saturating_sub(1);
        peel_residual = peel_residual.max(dropped(&alpha, keep_from, |m| -0.5 * ln_h[m]));
        for (k, a) in alpha.iter().enumerate().skip(keep_from) {
            if k < size {
                a_bar[(j, k)] = a * (ln_h[k] - ln_h[j]).exp();
            }
        }
    }

    let exact = matches!(basis.tag(), ConstructionTag::ExactC1);
    let gaps = (0..size)
        .map(|j| {
            if exact {
                let x = b * b;
                let g = exact_c1_gap(x, j);
                (g.ln_abs() - (ln_h[j] + (c + j as f64 + 1.0).ln())).exp()
            } else {
                let lhs = c + j as f64 + 1.0;
                let rhs = basis.scaled_norm_ratio(j);
                basis.scaled_norm_defect(j).abs() / lhs.max(rhs)
            }
        })
        .collect();

    Ok(finish(
        basis,
        size,
        tol,
        flags.into_iter().filter(|f| f.index < size).collect(),
        [a_bar, b_bar, l_bar, u_bar],
        1.0,
        peel_residual,
        gaps,
        exact,
        skips,
        u_rows,
    ))
}

fn build_elliptic(basis: &OPBasis, size: usize, tol: f64) -> RecurrenceMatrices {
    let tau = basis.params().tau.unwrap_or(0.0);
    let kbar = 1.0 / (1.0 - tau * tau);
    let ln_h = basis.scaled_ln_norms();
    let mut b_bar = CMatrix::zeros(size, size);
    let mut a_bar = CMatrix::zeros(size, size);
    let mut peel_residual: f64 = 0.0;
    for j in 0..size {
        let pc = basis.scaled_coeffs(j);
        let mut r = times_u(pc);
        axpy(&mut r, cr(-1.0), basis.scaled_coeffs(j + 1));
        let alpha = peel(r, basis);
        let keep_from = j.saturating_sub(1);
        peel_residual = peel_residual.max(dropped(&alpha, keep_from, |m| 0.5 * ln_h[m]));
        if j + 1 < size {
            b_bar[(j, j + 1)] = cr(1.0);
        }
        for (m, a) in alpha.iter().enumerate().skip(keep_from) {
            if m < size {
                b_bar[(j, m)] = *a;
            }
        }
        // ∂(W̄P̄_j) = W̄ (τk̄ u P̄_j + P̄_j')
        let mut d = derivative(pc);
        axpy(&mut d, cr(tau * kbar), &times_u(pc));
        let alpha = peel(d, basis);
        for (k, a) in alpha.iter().enumerate().skip(keep_from) {
            if k < size {
                a_bar[(j, k)] = a * (ln_h[k] - ln_h[j]).exp();
            }
        }
    }
    let zeros = CMatrix::zeros(size, size);
    finish(
        basis,
        size,
        tol,
        Vec::new(),
        [a_bar, b_bar, zeros.clone(), zeros],
        kbar,
        peel_residual,
        Vec::new(),
        true,
        Vec::new(),
        vec![Vec::new(); size],
    )
}

/// Largest |α_m| e^{w(m)} below `keep_from`, relative to the kept entries.
fn dropped(alpha: &[Complex64], keep_from: usize, w: impl Fn(usize) -> f64) -> f64 {
    let mag = |m: usize| alpha[m].norm() * w(m).exp();
    let kept = (keep_from..alpha.len()).map(mag).fold(0.0, f64::max);
    let lost = (0..keep_from.min(alpha.len())).map(mag).fold(0.0, f64::max);
    if lost == 0.0 {
        0.0
    } else {
        lost / kept.max(f64::MIN_POSITIVE)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    basis: &OPBasis,
    size: usize,
    tol: f64,
    flags: Vec<DegeneracyFlag>,
    bars: [CMatrix; 4],
    kbar: f64,
    peel_residual: f64,
    gaps: Vec<f64>,
    gaps_exact: bool,
    skips: Vec<(usize, usize)>,
    u_rows: Vec<Vec<(usize, Complex64)>>,
) -> RecurrenceMatrices {
    let [a_bar, b_bar, l_bar, u_bar] = bars;
    let s = basis.scale();
    let ls = s.ln();
    let conv = |m: &CMatrix, e: &dyn Fn(usize, usize) -> f64| {
        CMatrix::from_fn(size, size, |j, k| {
            let v = m[(j, k)];
            if v.norm() == 0.0 {
                v
            } else {
                v * (e(j, k) * ls).exp()
            }
        })
    };
    let a = conv(&a_bar, &|j, k| j as f64 + 1.0 - k as f64);
    let b = conv(&b_bar, &|j, k| k as f64 - j as f64 - 1.0);
    let l = conv(&l_bar, &|j, k| k as f64 - j as f64);
    let u = conv(&u_bar, &|j, k| j as f64 - k as f64);
    RecurrenceMatrices {
        size,
        a,
        b,
        l,
        u,
        a_bar,
        b_bar,
        l_bar,
        u_bar,
        degeneracy_flags: flags,
        tol_degenerate: tol,
        scale: s,
        weight_scale: kbar * s * s,
        peel_residual,
        weight: basis.weight(),
        charge: basis.params().c,
        center: basis.scaled_center(),
        ln_norms: basis.scaled_ln_norms()[..=size].to_vec(),
        gaps,
        gaps_exact,
        skips,
        u_rows,
    }
}

/// Residuals of the action checks at a set of points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActionResiduals {
    /// max relative residual of ζ(I+L)Ψ = BΨ
    pub b: f64,
    /// max relative residual of ∂(I+U)Φ = AΦ
    pub a: f64,
}

impl RecurrenceMatrices {
    /// Rows and columns on which the relations are asserted.
    pub fn window(&self) -> usize {
        self.size.saturating_sub(2)
    }

    fn relation_sides(&self) -> (CMatrix, CMatrix) {
        let n = self.size;
        let id = CMatrix::identity(n);
        let lhs = self.a.mul(&id.add(&self.l.adjoint())).scale(1.0 / self.weight_scale);
        let rhs = id.add(&self.u).mul(&self.b.adjoint());
        (lhs, rhs)
    }

    /// ‖(1/N)A(I+L*) − (I+U)B*‖_max / (‖A‖_max/N) on the window.
    pub fn relation_residual(&self) -> f64 {
        let w = self.window();
        let (lhs, rhs) = self.relation_sides();
        let mut diff: f64 = 0.0;
        let mut amax: f64 = 0.0;
        for j in 0..w {
            for k in 0..w {
                diff = diff.max((lhs[(j, k)] - rhs[(j, k)]).norm());
                amax = amax.max(self.a[(j, k)].norm());
            }
        }
        diff / (amax / self.weight_scale).max(f64::MIN_POSITIVE)
    }

    /// Row-relative residual of Ā(I+L̄*) = k̄(I+Ū)B̄* on the window.
    pub fn relation_residual_scaled(&self) -> f64 {
        let n = self.size;
        let w = self.window();
        let kbar = self.weight_scale / (self.scale * self.scale);
        let id = CMatrix::identity(n);
        let lhs = self.a_bar.mul(&id.add(&self.l_bar.adjoint()));
        let rhs = id.add(&self.u_bar).mul(&self.b_bar.adjoint()).scale(kbar);
        let mut worst: f64 = 0.0;
        for j in 0..w {
            let mut diff: f64 = 0.0;
            let mut mag: f64 = 0.0;
            for k in 0..w {
                diff = diff.max((lhs[(j, k)] - rhs[(j, k)]).norm());
                mag = mag.max(lhs[(j, k)].norm()).max(rhs[(j, k)].norm());
            }
            worst = worst.max(diff / mag.max(f64::MIN_POSITIVE));
        }
        worst
    }

    /// ln of the weight factor and its logarithmic derivative at u.
    fn weight_parts(&self, u: Complex64) -> Result<(Complex64, Complex64)> {
        match self.weight {
            WeightKind::Elliptic => {
                let kbar = self.weight_scale / (self.scale * self.scale);
                let tau = 1.0 - 1.0 / kbar;
                let tau = tau.max(0.0).sqrt();
                Ok(((u * u * (0.5 * tau * kbar)).exp(), u * (tau * kbar)))
            }
            _ => {
                let z = u - self.center;
                if z.norm() == 0.0 {
                    return Err(Error::Domain("action check at the charge".into()));
                }
                Ok((charge_power(z, self.charge)?, self.charge / z))
            }
        }
    }

    /// Action checks at physical points ζ, with relative residuals per row.
    pub fn action_residuals(&self, basis: &OPBasis, points: &[Complex64]) -> Result<ActionResiduals> {
        let w = self.window();
        let n = self.size;
        let ln_h = &self.ln_norms;
        let per_point: Vec<Result<(f64, f64)>> = points
            .par_iter()
            .map(|&zeta| {
                let u = zeta * self.scale;
                let (g, dlog) = self.weight_parts(u)?;
                let (p, dp) = basis.eval_scaled_with_derivative(u, n + 2);
                let psi: Vec<Complex64> = p.iter().map(|v| v * g).collect();
                let phi: Vec<Complex64> = psi.iter().enumerate().map(|(j, v)| v * (-ln_h[j.min(n)]).exp()).collect();
                let h = |i: usize| basis.scaled_ln_norm(i);
                let dphi = |i: usize| g * (dp[i] + dlog * p[i]) * (-h(i)).exp();
                let mut worst_b: f64 = 0.0;
                let mut worst_a: f64 = 0.0;
                for j in 0..w {
                    let mut lhs = psi[j];
                    for k in 0..j {
                        lhs += self.l_bar[(j, k)] * psi[k];
                    }
                    lhs *= u;
                    let mut rhs = cr(0.0);
                    for m in 0..n {
                        rhs += self.b_bar[(j, m)] * psi[m];
                    }
                    worst_b = worst_b.max(relative_residual(lhs, rhs));

                    let mut lhs = dphi(j);
                    for &(i, v) in &self.u_rows[j] {
                        lhs += v * dphi(i);
                    }
                    let mut rhs = cr(0.0);
                    for k in 0..n {
                        rhs += self.a_bar[(j, k)] * phi[k];
                    }
                    worst_a = worst_a.max(relative_residual(lhs, rhs));
                }
                Ok((worst_b, worst_a))
            })
            .collect();
        let mut out = ActionResiduals { b: 0.0, a: 0.0 };
        for r in per_point {
            let (b, a) = r?;
            out.b = out.b.max(b);
            out.a = out.a.max(a);
        }
        Ok(out)
    }

    /// Diagonal blocks of (T_+ − E)(I+U*) − A*/N on the window, E removing
    /// the shift on rows covered by a U skip.
    pub fn t_blocks(&self) -> Vec<(Vec<usize>, CMatrix)> {
        let (m, _, _) = self.t_matrix();
        self.block_rows()
            .into_iter()
            .map(|rows| {
                let k = rows.len();
                let blk = CMatrix::from_fn(k, k, |p, q| m[(rows[p], rows[q])]);
                (rows, blk)
            })
            .collect()
    }

    fn t_matrix(&self) -> (CMatrix, CMatrix, CMatrix) {
        let n = self.size;
        let mut shift = CMatrix::zeros(n, n);
        for j in 0..n.saturating_sub(1) {
            shift[(j, j + 1)] = cr(1.0);
        }
        for &(j, i) in &self.skips {
            for k in j..i.saturating_sub(1) {
                if k + 1 < n {
                    shift[(k, k + 1)] = cr(0.0);
                }
            }
        }
        let p1 = shift.mul(&CMatrix::identity(n).add(&self.u.adjoint()));
        let p2 = self.a.adjoint().scale(1.0 / self.weight_scale);
        let m = p1.add(&p2.scale(-1.0));
        (m, p1, p2)
    }

    fn block_rows(&self) -> Vec<Vec<usize>> {
        let w = self.window();
        let mut out = Vec::new();
        let mut j = 0;
        while j < w {
            if let Some(&(_, i)) = self.skips.iter().find(|&&(s, _)| s == j) {
                let end = i.min(w);
                out.push((j..end).collect());
                j = end;
            } else {
                out.push(vec![j]);
                j += 1;
            }
        }
        out
    }

    /// Gap condition and block invertibility on the window.
    pub fn invertibility_check(&self) -> InvertibilityReport {
        let w = self.window();
        let tol = self.tol_degenerate;
        let flagged = |j: usize| self.degeneracy_flags.iter().any(|f| f.index == j);
        let gaps = (0..w.min(self.gaps.len()))
            .filter(|&j| !flagged(j))
            .map(|j| gap_entry(j, self.gaps[j], if self.gaps_exact { 0.0 } else { tol }))
            .collect();
        let (m, p1, p2) = self.t_matrix();
        let rows = self.block_rows();
        let mut blocks = Vec::new();
        let mut block_of = vec![0usize; w];
        for (bi, r) in rows.iter().enumerate() {
            for &j in r {
                block_of[j] = bi;
            }
            let k = r.len();
            let sub = CMatrix::from_fn(k, k, |p, q| m[(r[p], r[q])]);
            let s1 = CMatrix::from_fn(k, k, |p, q| p1[(r[p], r[q])]).max_abs();
            let s2 = CMatrix::from_fn(k, k, |p, q| p2[(r[p], r[q])]).max_abs();
            let scale = s1.max(s2);
            let sv = smallest_singular_value(&sub);
            blocks.push(BlockEntry { rows: r.clone(), smallest_singular_value: sv, scale, pass: sv > tol * scale });
        }
        let mut off: f64 = 0.0;
        for j in 0..w {
            for k in 0..w {
                if block_of[j] != block_of[k] {
                    let s = p1[(j, k)].norm().max(p2[(j, k)].norm());
                    if s > 0.0 {
                        off = off.max(m[(j, k)].norm() / s);
                    }
                }
            }
        }
        InvertibilityReport::new(gaps, blocks, off)
    }
}

fn gap_entry(index: usize, relative_gap: f64, tol: f64) -> GapEntry {
    GapEntry { index, relative_gap, pass: relative_gap.is_finite() && relative_gap > tol }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapEntry {
    pub index: usize,
    /// |(c+j+1)h_j/N − h_{j+1}| relative to the larger term.
    pub relative_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockEntry {
    pub rows: Vec<usize>,
    pub smallest_singular_value: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertibilityReport {
    pub gaps: Vec<GapEntry>,
    pub blocks: Vec<BlockEntry>,
    /// Largest entry outside the diagonal blocks, relative to its terms.
    pub off_block_max: f64,
    pub all_pass: bool,
}

impl InvertibilityReport {
    fn new(gaps: Vec<GapEntry>, blocks: Vec<BlockEntry>, off_block_max: f64) -> Self {
        let all_pass = gaps.iter().all(|g| g.pass) && blocks.iter().all(|b| b.pass);
        Self { gaps, blocks, off_block_max, all_pass }
    }
}

/// Gap condition alone, for bases whose matrices cannot be built.
pub fn invertibility_check_basis(basis: &OPBasis, rows: usize, tol: f64) -> Result<InvertibilityReport> {
    if basis.weight() != WeightKind::PointCharge {
        return Err(Error::Unsupported("gap condition applies to point-charge bases".into()));
    }
    if basis.len() < rows + 1 {
        return Err(Error::InvalidParam("basis too short for the requested rows".into()));
    }
    let consts = CdConstants::new(basis)?;
    let gaps = (0..rows).map(|j| gap_entry(j, consts.relative_gap(j), consts.gap_tol(tol))).collect();
    Ok(InvertibilityReport::new(gaps, Vec::new(), 0.0))
}

/// ḡ_k = (k+2)h̄_k − h̄_{k+1} for the c = 1 basis, x = b².
fn exact_c1_gap(x: f64, k: usize) -> Scaled {
    let lq1 = ln_upper_reg_gamma_int(k + 1, x);
    let lq2 = ln_upper_reg_gamma_int(k + 2, x);
    let lt1 = (k + 1) as f64 * x.ln() - x - ln_fact(k + 1);
    let t2_over_q2 = (lt1 + x.ln() - ((k + 2) as f64).ln() - lq2).exp();
    // (k+2)! t1 [Q2(1 − x/(k+2)) + t2] / (Q1 Q2)
    let inner = 1.0 - x / (k + 2) as f64 + t2_over_q2;
    sshift(split(cr(inner)), ln_fact(k + 2) + lt1 - lq1)
}

/// Quantities entering the right side of the point-charge identity.
struct CdConstants<'a> {
    basis: &'a OPBasis,
    exact_x: Option<f64>,
}

impl<'a> CdConstants<'a> {
    fn new(basis: &'a OPBasis) -> Result<Self> {
        if basis.weight() != WeightKind::PointCharge {
            return Err(Error::InvalidParam("point-charge basis required".into()));
        }
        let b = basis.scaled_center();
        let exact_x = (basis.tag() == ConstructionTag::ExactC1).then_some(b * b);
        Ok(Self { basis, exact_x })
    }

    fn c(&self) -> f64 {
        self.basis.params().c
    }

    fn gap_tol(&self, tol: f64) -> f64 {
        if self.exact_x.is_some() {
            0.0
        } else {
            tol
        }
    }

    /// ḡ_k = (k+c+1)h̄_k − h̄_{k+1}.
    fn gap(&self, k: usize) -> Scaled {
        if let Some(x) = self.exact_x {
            return exact_c1_gap(x, k);
        }
        let lh = self.basis.scaled_ln_norms();
        sshift(split(cr(self.basis.scaled_norm_defect(k))), lh[k])
    }

    fn relative_gap(&self, k: usize) -> f64 {
        let lh = self.basis.scaled_ln_norms();
        let big = (lh[k] + (self.c() + k as f64 + 1.0).ln()).max(lh[k + 1]);
        (self.gap(k).ln_abs() - big).exp()
    }

    /// P̄_k(b), with its roundoff scale Σ|c_m||b|^m.
    fn p_at_b(&self, k: usize) -> (Scaled, f64) {
        let b = self.basis.scaled_center();
        let cs = self.basis.scaled_coeffs(k);
        let scale: f64 = cs.iter().enumerate().map(|(m, c)| c.norm() * b.abs().powi(m as i32)).sum();
        if let Some(x) = self.exact_x {
            // b^k [k+1 − x + (k+1) t_{k+1}/Q(k+1)]
            let lt = (k + 1) as f64 * x.ln() - x - ln_fact(k + 1);
            let f = (k + 1) as f64 - x + (k + 1) as f64 * (lt - ln_upper_reg_gamma_int(k + 1, x)).exp();
            return (sshift(split(cr(f)), k as f64 * b.ln()), scale);
        }
        (split(horner(cs, cr(b))), scale)
    }

    /// Coefficients of P̄_k − u P̄_{k−1}.
    fn diff_poly(&self, k: usize) -> Poly {
        if let Some(x) = self.exact_x {
            let b = self.basis.scaled_center();
            let lb = b.ln();
            let lq = |m: usize| ln_upper_reg_gamma_int(m, x);
            let lt = |m: usize| m as f64 * x.ln() - x - ln_fact(m);
            let mut out = vec![cr(0.0); k + 1];
            out[0] = cr((k as f64 * lb - x - lq(k + 1)).exp());
            for (m, o) in out.iter_mut().enumerate().take(k).skip(1) {
                // b^{k−m} [t_m Q(k) − Q(m) t_k] / (Q(k) Q(k+1))
                let e1 = lt(m) + lq(k);
                let e2 = lq(m) + lt(k);
                let v = -(e2 - e1).exp_m1();
                *o = cr(v * ((k - m) as f64 * lb + e1 - lq(k) - lq(k + 1)).exp());
            }
            return out;
        }
        let mut out: Poly = self.basis.scaled_coeffs(k).to_vec();
        axpy(&mut out, cr(-1.0), &times_u(self.basis.scaled_coeffs(k - 1)));
        out.truncate(k);
        out
    }
}

/// g(u)conj(g(v)) and c·g(u)conj((v−b)^{c−1}) for g(u) = (u−b)^c.
fn charge_parts(c: f64, b: f64, u: Complex64, v: Complex64) -> Result<(Complex64, Complex64)> {
    let bz = cr(b);
    let gu = charge_power(u - bz, c)?;
    let gv = charge_power(v - bz, c)?;
    let gc = gu * gv.conj();
    if c == 0.0 {
        return Ok((gc, cr(0.0)));
    }
    let dv = v - bz;
    let gd = if dv.norm() == 0.0 {
        if c >= 1.0 {
            c * gu * charge_power(dv, c - 1.0)?.conj()
        } else if gu.norm() == 0.0 && c > 0.5 {
            cr(0.0)
        } else {
            return Err(Error::Domain("∂̄ of the charge factor is singular at the charge".into()));
        }
    } else {
        c * gu * charge_power(dv, c - 1.0)?.conj()
    };
    Ok((gc, gd))
}

/// Scaled pieces of the point-charge identity: the sum on the left and the
/// two right-hand terms, all without the e^{−uv̄} factor.
struct PointChargeSides {
    lhs: Scaled,
    t1: Scaled,
    t2: Scaled,
}

fn point_charge_sides(basis: &OPBasis, n: usize, u: Complex64, v: Complex64, tol: f64) -> Result<PointChargeSides> {
    let p = basis.params();
    if p.n != n {
        return Err(Error::InvalidParam(format!(
            "identity needs N modes equal to the weight scale N = {}, got {n}",
            p.n
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParam("identity needs N ≥ 1".into()));
    }
    if basis.len() < n + 2 {
        return Err(Error::InvalidParam(format!("basis must cover degree {}", n + 1)));
    }
    let consts = CdConstants::new(basis)?;
    let gtol = consts.gap_tol(tol);
    for k in [n - 1, n] {
        let g = consts.relative_gap(k);
        if !(g > gtol) || !g.is_finite() {
            return Err(Error::Degenerate { row: k, kind: "norm gap (c+k+1)h_k/N − h_{k+1} vanishes".into() });
        }
    }
    let (pn, pn_scale) = consts.p_at_b(n);
    if !(pn.ln_abs() > (tol * pn_scale).ln()) {
        return Err(Error::Degenerate { row: n, kind: "phi_at_a_zero".into() });
    }
    let (pn1, _) = consts.p_at_b(n + 1);
    let c = p.c;
    let b = basis.scaled_center();
    let (gc, gd) = charge_parts(c, b, u, v)?;
    let ln_h = basis.scaled_ln_norms();
    let pu = basis.eval_scaled(u, n + 1);
    let pv = basis.eval_scaled(v, n + 1);
    let dpv = basis.eval_scaled_derivative(v, n + 1);

    let lead = gd - u * gc;
    let mut terms = Vec::with_capacity(2 * n);
    for j in 0..n {
        let a = smul(pu[j], sconj(pv[j]));
        terms.push(sshift(smul(a, split(lead)), -ln_h[j]));
        let d = smul(pu[j], sconj(dpv[j]));
        terms.push(sshift(smul(d, split(gc)), -ln_h[j]));
    }
    let lhs = ssum(&terms);

    let horner_s = |poly: &Poly| -> Scaled {
        if poly.is_empty() {
            return Scaled::ZERO;
        }
        horner_split(std::slice::from_ref(poly), u)[0]
    };
    let dn = horner_s(&consts.diff_poly(n));
    let dn1 = horner_s(&consts.diff_poly(n + 1));

    let dpsi_n = ssum(&[smul(sconj(dpv[n]), split(gc)), smul(sconj(pv[n]), split(gd))]);
    let t1 = sdiv(smul(dpsi_n, dn), consts.gap(n - 1))?;
    let ratio = sdiv(pn1, pn)?;
    let t2 =
        smul(sshift(sdiv(ratio, consts.gap(n))?, ln_h[n] - ln_h[n - 1]), smul(smul(sconj(pv[n - 1]), split(gc)), dn1));
    Ok(PointChargeSides { lhs, t1, t2 })
}

fn finish_value(s: Scaled, g: Complex64, ln_extra: f64) -> Complex64 {
    sshift(smul(s, sexp(g)), ln_extra).value()
}

/// Both sides of the point-charge identity at physical (ζ, η):
/// lhs = ∂̄_η K̃_N(ζ,η) analytically, rhs the two-term closed form.
pub fn cd_sides_pointcharge(basis: &OPBasis, n: usize, zeta: Complex64, eta: Complex64) -> Result<IdentityCheck> {
    let s = basis.scale();
    let (u, v) = (zeta * s, eta * s);
    let sides = point_charge_sides(basis, n, u, v, DEGENERATE_TOL)?;
    let g = -u * v.conj();
    let l3 = 3.0 * s.ln();
    let lhs = finish_value(sides.lhs, g, l3);
    let rhs = finish_value(ssum(&[sides.t1, sneg(sides.t2)]), g, l3);
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Local terms of the charge-centred identity at z, ζ = a + z/√N.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalTerms {
    pub term_i: Complex64,
    pub term_ii: Complex64,
    pub dbar_r: Complex64,
}

impl LocalTerms {
    /// e^{−|z|²}(I − II), to be compared with `dbar_r`.
    pub fn rhs(&self, z: Complex64) -> Complex64 {
        (self.term_i - self.term_ii) * (-z.norm_sqr()).exp()
    }
}

pub fn local_terms(basis: &OPBasis, n: usize, z: Complex64) -> Result<LocalTerms> {
    let b = basis.scaled_center();
    let u = cr(b) + z;
    let sides = point_charge_sides(basis, n, u, u, DEGENERATE_TOL)?;
    let pre = cr(-b * b - 2.0 * b * z.re);
    Ok(LocalTerms {
        term_i: finish_value(sides.t1, pre, 0.0),
        term_ii: finish_value(sides.t2, pre, 0.0),
        dbar_r: finish_value(sides.lhs, cr(-u.norm_sqr()), 0.0),
    })
}

/// Both sides of the elliptic identity at physical (ζ, η) for N modes.
pub fn cd_sides_elliptic(tau: f64, n: usize, zeta: Complex64, eta: Complex64) -> Result<IdentityCheck> {
    let basis = hermite_elliptic_basis(tau, n, n)?;
    cd_sides_elliptic_with(&basis, zeta, eta)
}

pub fn cd_sides_elliptic_with(basis: &OPBasis, zeta: Complex64, eta: Complex64) -> Result<IdentityCheck> {
    if basis.weight() != WeightKind::Elliptic {
        return Err(Error::InvalidParam("elliptic basis required".into()));
    }
    let n = basis.params().n;
    if n == 0 || basis.len() < n + 1 {
        return Err(Error::InvalidParam(format!("elliptic basis must cover degree {n}")));
    }
    let tau = basis.params().tau.unwrap_or(0.0);
    let kbar = 1.0 / (1.0 - tau * tau);
    let s = basis.scale();
    let (u, v) = (zeta * s, eta * s);
    let ln_h = basis.scaled_ln_norms();
    let pu = basis.eval_scaled(u, n + 1);
    let pv = basis.eval_scaled(v, n + 1);
    let dpv = basis.eval_scaled_derivative(v, n);
    // Σ_j [(−k̄u + τk̄v̄) conj P̄_j(v) + conj P̄_j'(v)] P̄_j(u)/h̄_j
    let lead = split((v.conj() * tau - u) * kbar);
    let mut terms = Vec::with_capacity(2 * n);
    for j in 0..n {
        terms.push(sshift(smul(smul(pu[j], sconj(pv[j])), lead), -ln_h[j]));
        terms.push(sshift(smul(pu[j], sconj(dpv[j])), -ln_h[j]));
    }
    let lhs = ssum(&terms);
    // k̄/h̄_{N−1} (τ conj P̄_N(v) P̄_{N−1}(u) − conj P̄_{N−1}(v) P̄_N(u))
    let r = ssum(&[smul(smul(sconj(pv[n]), pu[n - 1]), split(cr(tau))), sneg(smul(sconj(pv[n - 1]), pu[n]))]);
    let rhs = sshift(r, kbar.ln() - ln_h[n - 1]);
    let g = (-u * v.conj() + (u * u + (v * v).conj()) * (0.5 * tau)) * kbar;
    let l3 = 3.0 * s.ln();
    Ok(IdentityCheck::new(finish_value(lhs, g, l3), finish_value(rhs, g, l3)))
}

/// ∂_x R̃_N(x+iy) for the elliptic ensemble from the closed form
/// −2 N^{N+1}/(N−1)! · e^{−NQ}/((1+τ)√(1−τ²)) · Re[P_N(x−iy) P_{N−1}(x+iy)].
pub fn dx_density_elliptic(tau: f64, n: usize, zeta: Complex64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParam("N must be at least 1".into()));
    }
    let basis = hermite_elliptic_basis(tau, n, n)?;
    let s = basis.scale();
    let u = zeta * s;
    let pu = basis.eval_scaled(u, n + 1);
    let pc = basis.eval_scaled(u.conj(), n + 1);
    let prod = smul(pc[n], pu[n - 1]);
    let q = (u.norm_sqr() - tau * (u * u).re) / (1.0 - tau * tau);
    let ln_pref = 3.0 * s.ln() - q - ln_fact(n - 1) - (1.0 + tau).ln() - 0.5 * (1.0 - tau * tau).ln();
    Ok(-2.0 * sshift(prod, ln_pref).value().re)
}

/// ∂_x R̃_N from the identity's right side: 2 Re ∂̄_η K̃_N(ζ,η)|_{η=ζ}.
pub fn dx_density_elliptic_cdi(tau: f64, n: usize, zeta: Complex64) -> Result<f64> {
    Ok(2.0 * cd_sides_elliptic(tau, n, zeta, zeta)?.rhs.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyStatus {
    Pass,
    Fail,
    Unsupported,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thresholds {
    pub relation: f64,
    pub action: f64,
    pub identity: f64,
}

/// Verification report for the recurrence relations and identities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdiReport {
    pub params: EnsembleParams,
    pub status: VerifyStatus,
    pub window: usize,
    pub relation_residual: Option<f64>,
    pub action_residuals: Option<ActionResiduals>,
    pub identity_residual: Option<f64>,
    pub thresholds: Thresholds,
    pub degeneracy_flags: Vec<DegeneracyFlag>,
    pub invertibility: Option<InvertibilityReport>,
    pub message: Option<String>,
}

impl CdiReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Sample points a + r e^{iθ}/√N around the charge.
pub fn sample_points_near(a: f64, n: usize, count: usize) -> Vec<Complex64> {
    let sn = (n as f64).sqrt();
    (0..count)
        .map(|k| {
            let r = 0.35 + 1.1 * ((k as f64 * 0.618_033_988_75).fract());
            let th = 0.4 + 2.399_963 * k as f64;
            cr(a) + Complex64::from_polar(r, th) / sn
        })
        .collect()
}

/// Full point-charge check: matrices, relations, actions, invertibility and
/// the identity on a 5×5 grid of (ζ, η) near the charge.
pub fn verify_point_charge(params: &EnsembleParams) -> Result<CdiReport> {
    params.validate()?;
    let n = params.n;
    let size = n + 4;
    let thresholds = Thresholds { relation: RELATION_TOL, action: ACTION_TOL, identity: IDENTITY_TOL };
    let mut report = CdiReport {
        params: params.clone(),
        status: VerifyStatus::Unsupported,
        window: size - 2,
        relation_residual: None,
        action_residuals: None,
        identity_residual: None,
        thresholds,
        degeneracy_flags: Vec::new(),
        invertibility: None,
        message: None,
    };
    if params.c != 1.0 && params.a != 0.0 && params.c != 0.0 && size + 1 > DEGREE_CAP {
        report.message = Some(format!("N = {n} needs degree {} beyond the quadrature cap", size + 1));
        return Ok(report);
    }
    let basis = point_charge_basis(params, size + 1)?;
    report.degeneracy_flags = detect_degeneracies(&basis, size, DEGENERATE_TOL)?;
    let mats = match build_matrices(&basis, size, DEGENERATE_TOL) {
        Ok(m) => m,
        Err(e) if e.is_unsupported() => {
            report.invertibility = Some(invertibility_check_basis(&basis, size - 2, DEGENERATE_TOL)?);
            report.message = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let rel = mats.relation_residual();
    let pts = sample_points_near(params.a, n, 12);
    let act = mats.action_residuals(&basis, &pts)?;
    let inv = mats.invertibility_check();
    report.relation_residual = Some(rel);
    report.action_residuals = Some(act);
    let grid = sample_points_near(params.a, n, 5);
    let mut worst: f64 = 0.0;
    for &z in &grid {
        for &w in &grid {
            match cd_sides_pointcharge(&basis, n, z, w) {
                Ok(chk) => worst = worst.max(chk.residual),
                Err(e) if e.is_unsupported() => {
                    report.invertibility = Some(inv);
                    report.message = Some(e.to_string());
                    return Ok(report);
                }
                Err(e) => return Err(e),
            }
        }
    }
    report.identity_residual = Some(worst);
    let pass =
        rel <= RELATION_TOL && act.a <= ACTION_TOL && act.b <= ACTION_TOL && worst <= IDENTITY_TOL && inv.all_pass;
    report.invertibility = Some(inv);
    report.status = if pass { VerifyStatus::Pass } else { VerifyStatus::Fail };
    Ok(report)
}

/// Elliptic check: identity on a 5×5 grid plus the real-derivative form.
pub fn verify_elliptic(tau: f64, n: usize) -> Result<CdiReport> {
    let params = EnsembleParams::elliptic(tau, n)?;
    let grid: Vec<Complex64> =
        (0..5).map(|k| Complex64::from_polar(0.15 + 0.17 * k as f64, 0.3 + 1.3 * k as f64)).collect();
    let mut worst: f64 = 0.0;
    for &z in &grid {
        for &w in &grid {
            worst = worst.max(cd_sides_elliptic(tau, n, z, w)?.residual);
        }
    }
    for &z in &grid {
        let a = dx_density_elliptic(tau, n, z)?;
        let b = dx_density_elliptic_cdi(tau, n, z)?;
        worst = worst.max(relative_residual(cr(a), cr(b)));
    }
    let basis = hermite_elliptic_basis(tau, n, n + 3)?;
    let mats = build_matrices(&basis, n + 2, DEGENERATE_TOL)?;
    let rel = mats.relation_residual();
    let act = mats.action_residuals(&basis, &grid)?;
    let pass = worst <= ELLIPTIC_TOL && rel <= RELATION_TOL && act.a <= ACTION_TOL && act.b <= ACTION_TOL;
    Ok(CdiReport {
        params,
        status: if pass { VerifyStatus::Pass } else { VerifyStatus::Fail },
        window: mats.window(),
        relation_residual: Some(rel),
        action_residuals: Some(act),
        identity_residual: Some(worst),
        thresholds: Thresholds { relation: RELATION_TOL, action: ACTION_TOL, identity: ELLIPTIC_TOL },
        degeneracy_flags: Vec::new(),
        invertibility: None,
        message: None,
    })
}
