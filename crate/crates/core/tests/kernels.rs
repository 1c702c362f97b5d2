mod common;

use common::*;
use lemnis::kernels::*;
use lemnis::orthopoly::*;
use lemnis::{Complex64, EnsembleParams};
use proptest::prelude::*;

fn pc(a: f64, c: f64, n: usize) -> EnsembleParams {
    EnsembleParams::new(a, c, n).unwrap()
}

/// Rescaled one-point function at a = 0 from its radial closed form.
fn radial_density(c: f64, n: usize, z: Complex64) -> f64 {
    let x = z.norm_sqr();
    (0..n).map(|j| x.powf(j as f64 + c) * (-x).exp() / gamma_oracle(j as f64 + c + 1.0)).sum()
}

#[test]
fn ginibre_three_modes_closed_form() {
    let k = KernelHandle::hat(&pc(0.0, 0.0, 3)).unwrap();
    for &z in &[c64(0.1, 0.2), c64(-0.4, 0.3), c64(0.7, -0.9)] {
        let x = 3.0 * z.norm_sqr();
        let want = (-x).exp() * (0..3).map(|j| x.powi(j) * 3.0 / factorial(j as usize)).sum::<f64>();
        assert!((k.density(z).unwrap() - want).abs() < 1e-14 * want);
    }
}

#[test]
fn diagonal_is_real_and_nonnegative() {
    for conv in [Convention::Tilde, Convention::Hat] {
        let b = point_charge_basis(&pc(0.7, 0.5, 6), 5).unwrap();
        let k = KernelHandle::new(b, conv, None).unwrap();
        for &z in &[c64(0.2, 0.1), c64(1.3, -0.4), c64(-0.5, 0.8)] {
            let v = k.eval(z, z).unwrap();
            assert!(v.im.abs() < 1e-12 * v.re.abs().max(1e-300));
            assert!(v.re >= -1e-12);
        }
    }
}

#[test]
fn hat_and_tilde_diagonals_are_reflections() {
    let a = 0.8;
    let b = point_charge_basis(&pc(a, 0.5, 6), 5).unwrap();
    let hat = KernelHandle::new(b.clone(), Convention::Hat, None).unwrap();
    let tilde = KernelHandle::new(b, Convention::Tilde, None).unwrap();
    for &z in &[c64(0.3, 0.2), c64(1.1, -0.6), c64(-0.2, 0.5)] {
        let x = hat.density(z).unwrap();
        let y = tilde.density(c64(a, 0.0) - z).unwrap();
        assert!((x - y).abs() < 1e-13 * x.abs().max(1e-300), "{z}: {x} {y}");
    }
}

#[test]
fn circular_law_interior() {
    let k = KernelHandle::hat(&pc(0.0, 0.0, 200)).unwrap();
    for &z in &[c64(0.0, 0.0), c64(0.5, 0.3), c64(-0.2, 0.9)] {
        let v = k.rescaled_density(z, Rescaling::Origin).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
    // physical interior at 0.8 of the droplet radius
    let v = k.density(c64(0.8, 0.0)).unwrap() / 200.0;
    assert!((v - 1.0).abs() < 1e-6);
}

#[test]
fn edge_profile_at_unit_charge_distance() {
    let k = KernelHandle::hat(&pc(1.0, 0.0, 50)).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let x = -2.0 + 0.1 * i as f64;
        let v = k.rescaled_density(c64(x, 0.0), Rescaling::Origin).unwrap();
        let want = 0.5 * erfc_oracle(-2.0 * x / 2f64.sqrt());
        worst = worst.max((v - want).abs());
    }
    assert!(worst < 0.05, "{worst}");
}

/// erfc by its Taylor series of erf (adequate for |x| ≤ 4 in double).
fn erfc_oracle(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0usize;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) && n < 400 {
        n += 1;
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
}

#[test]
fn k_point_elementary_cases() {
    let k = KernelHandle::hat(&pc(0.6, 1.0, 5)).unwrap();
    let (z, w) = (c64(0.3, 0.1), c64(0.8, -0.4));
    assert!((k.k_point(&[z]).unwrap() - k.density(z).unwrap()).abs() < 1e-14 * k.density(z).unwrap());
    let r2 = k.density(z).unwrap() * k.density(w).unwrap() - k.eval(z, w).unwrap().norm_sqr();
    assert!((k.k_point(&[z, w]).unwrap() - r2).abs() < 1e-12 * r2.abs());
    let rep = k.k_point(&[z, w, z]).unwrap();
    assert!(rep.abs() < 1e-10 * k.density(z).unwrap().powi(3));
    assert!(k.k_point(&[z; 6]).is_err());
}

#[test]
fn k_point_invariant_under_branch_rotation() {
    // rotating the cut changes W by a phase e^{2πic m(ζ)}; it conjugates the
    // kernel matrix by a diagonal unitary
    let k = KernelHandle::tilde(&pc(0.9, 0.37, 6)).unwrap();
    let pts = [c64(0.2, 0.3), c64(1.4, -0.1), c64(0.5, -0.7)];
    let base = k.k_point(&pts).unwrap();
    let mut m = lemnis::linalg::CMatrix::zeros(3, 3);
    let ph: Vec<Complex64> = pts
        .iter()
        .map(|p| Complex64::from_polar(1.0, if p.im < 0.0 { 2.0 * std::f64::consts::PI * 0.37 } else { 0.0 }))
        .collect();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = ph[i] * k.eval(pts[i], pts[j]).unwrap() * ph[j].conj();
        }
    }
    let rotated = lemnis::linalg::determinant(&m).re;
    assert!((rotated - base).abs() < 1e-10 * base.abs());
}

#[test]
fn berezin_basics() {
    let k = KernelHandle::hat(&pc(0.5, 1.0, 6)).unwrap();
    let z = c64(0.3, -0.2);
    assert!((k.berezin(z, z).unwrap() - k.density(z).unwrap()).abs() < 1e-12 * k.density(z).unwrap());
    assert!(k.berezin(z, c64(1.0, 1.0)).unwrap() >= 0.0);
    assert!(matches!(k.berezin(c64(0.0, 0.0), z), Err(lemnis::Error::Domain(_))));
}

#[test]
fn mass_reproducing_and_projection() {
    let (a, c, n) = (0.7, 0.5, 6usize);
    let k = KernelHandle::hat(&pc(a, c, n)).unwrap();
    // physical quadrature about the origin (the charge of the hat weight)
    let r_max = a + (60.0 / n as f64).sqrt();
    let nodes = polar_nodes(c64(0.0, 0.0), r_max, 192);
    let (z, w) = (c64(0.4, 0.3), c64(0.9, -0.2));
    let mut mass = 0.0;
    let mut repro = c64(0.0, 0.0);
    let mut proj = 0.0;
    for (x, _, wt) in &nodes {
        mass += k.density(*x).unwrap() * wt;
        repro += k.eval(z, *x).unwrap() * k.eval(*x, w).unwrap() * *wt;
        proj += k.berezin(z, *x).unwrap() * wt;
    }
    assert!((mass - n as f64).abs() < 1e-6 * n as f64, "mass {mass}");
    let kw = k.eval(z, w).unwrap();
    assert!((repro - kw).norm() < 1e-8 * kw.norm(), "{repro} {kw}");
    assert!((proj - 1.0).abs() < 1e-8, "{proj}");
}

#[test]
fn insertion_recursion_radial_closed_form() {
    let (c, n) = (0.0, 5usize);
    let z = c64(0.7, 0.0);
    let r = insertion_recursion_check(&pc(0.0, c, n), z).unwrap();
    assert!(r.residual < 1e-8, "{:e}", r.residual);
    // both sides against closed forms: R^{c+1}_N and R^c_{N+1} − |z|^{2c}e^{−|z|²}/Γ(c+1)
    let x = z.norm_sqr();
    let lhs = radial_density(c + 1.0, n, z);
    let rhs = radial_density(c, n + 1, z) - x.powf(c) * (-x).exp() / gamma_oracle(c + 1.0);
    assert!((r.lhs.re - lhs).abs() < 1e-12 && (r.rhs.re - rhs).abs() < 1e-12);
}

#[test]
fn insertion_recursion_quadrature_basis() {
    for &z in &[c64(0.7, 0.2), c64(-1.1, 0.4), c64(0.0, 1.6)] {
        let r = insertion_recursion_check(&pc(0.8, 0.5, 6), z).unwrap();
        assert!(r.residual < 1e-6, "{z}: {:e}", r.residual);
    }
}

#[test]
fn insertion_recursion_at_conditioning_point() {
    // B(0,0) = R(0): the recursion forces R^{c+1}(0) = 0
    let r = insertion_recursion_check(&pc(0.8, 0.5, 6), c64(0.0, 0.0)).unwrap();
    assert!(r.lhs.norm() < 1e-300 && r.rhs.norm() < 1e-12);
}

#[test]
fn multifold_trivial_fold() {
    let p = pc(0.6, 0.5, 5);
    let r = multifold_check(&p, c64(0.3, 0.4), c64(-0.2, 0.6)).unwrap();
    assert!(r.residual < 1e-13, "{:e}", r.residual);
}

/// Rescaled lemniscate kernel at a = 0 from normalised monomials:
/// ∫|u|^{2k+2c} e^{−|u|^{2d}} dA = Γ((k+c+1)/d)/d.
fn radial_lemniscate_kernel(d: usize, c: f64, n: usize, z: Complex64, w: Complex64) -> Complex64 {
    let zw = z * w.conj();
    let pre = z.powf(c) * w.powf(c).conj() * (-0.5 * (z.norm().powi(2 * d as i32) + w.norm().powi(2 * d as i32))).exp();
    let s: Complex64 =
        (0..d * n).map(|k| zw.powu(k as u32) * d as f64 / gamma_oracle((k as f64 + c + 1.0) / d as f64)).sum();
    pre * s
}

#[test]
fn multifold_radial_closed_form() {
    for &d in &[2usize, 3] {
        for &n in &[4usize, 6] {
            let p = pc(0.0, 0.0, n).with_d(d).unwrap();
            for &(z, w) in &[(c64(0.3, 0.4), c64(0.5, -0.1)), (c64(0.8, 0.0), c64(0.8, 0.0))] {
                let r = multifold_check(&p, z, w).unwrap();
                assert!(r.residual < 1e-9, "d={d} N={n} {:e}", r.residual);
                let want = radial_lemniscate_kernel(d, 0.0, n, z, w);
                assert!((r.lhs - want).norm() < 1e-12 * want.norm(), "{} {}", r.lhs, want);
            }
        }
    }
}

#[test]
fn multifold_quadrature_bases() {
    for &d in &[2usize, 3] {
        for &n in &[4usize, 6] {
            let p = pc(0.9, 1.0, n).with_d(d).unwrap();
            let r = multifold_check(&p, c64(0.5, 0.3), c64(0.7, -0.2)).unwrap();
            assert!(r.residual < 1e-6, "d={d} N={n} {:e}", r.residual);
        }
    }
}

#[test]
fn multifold_diagonal_matches_principal_branch_form() {
    // on the diagonal the printed form d|z|^{2(d−1)} Σ K̂^{c_l}(z^d, z^d) needs no lifting
    let (d, n) = (2usize, 4usize);
    let p = pc(0.9, 1.0, n).with_d(d).unwrap();
    let lem = KernelHandle::lemniscate(&p).unwrap();
    for &z in &[c64(0.5, 0.3), c64(-0.8, 0.6), c64(0.1, -1.0)] {
        let left = lem.rescaled_density(z, Rescaling::Origin).unwrap();
        let zd = z.powu(d as u32);
        let mut right = 0.0;
        for l in 0..d {
            let h = KernelHandle::hat(&pc(0.9, residue_charge(1.0, l, d), n)).unwrap();
            right += h.rescaled_density(zd, Rescaling::Origin).unwrap();
        }
        right *= d as f64 * z.norm().powi(2 * (d as i32 - 1));
        assert!((left - right).abs() < 1e-8 * left, "{z}: {left} {right}");
    }
}

#[test]
fn two_fold_relations() {
    for &(a, c, tol) in &[(0.0, 0.0, 1e-9), (0.9, 1.0, 1e-6), (0.9, 0.5, 1e-6)] {
        let p = pc(a, c, 4).with_d(2).unwrap();
        let checks = fold2_relations_check(&p, c64(0.5, 0.2), c64(0.3, -0.6)).unwrap();
        for r in checks {
            assert!(r.residual < tol, "a={a} c={c} {:e}", r.residual);
        }
    }
}

#[test]
fn convention_mismatch_rejected() {
    let b = hermite_elliptic_basis(0.5, 4, 3).unwrap();
    assert!(KernelHandle::new(b.clone(), Convention::Hat, None).is_err());
    assert!(KernelHandle::new(b.clone(), Convention::Tilde, Some(9)).is_err());
    assert!(KernelHandle::new(b, Convention::Tilde, None).is_ok());
}

#[test]
fn density_profile_metadata() {
    let k = KernelHandle::hat(&pc(0.5, 1.0, 8)).unwrap();
    let grid = vec![c64(0.0, 0.0), c64(0.5, 0.5), c64(1.0, -1.0)];
    let prof = k.density_profile(&grid, Rescaling::Origin).unwrap();
    assert_eq!(prof.values.len(), 3);
    assert_eq!(prof.n_terms, Some(8));
    let v = serde_json::to_value(&prof).unwrap();
    assert_eq!(v["rescaling"], "origin");
    assert_eq!(v["kind"], "finite_n");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hermitian_symmetry(zr in -1.5f64..1.5, zi in -1.5f64..1.5, wr in -1.5f64..1.5, wi in -1.5f64..1.5, conv in 0usize..3) {
        let (z, w) = (c64(zr, zi), c64(wr, wi));
        let k = match conv {
            0 => KernelHandle::tilde(&pc(0.7, 1.0, 6)).unwrap(),
            1 => KernelHandle::hat(&pc(0.7, 1.0, 6)).unwrap(),
            _ => KernelHandle::lemniscate(&pc(0.7, 1.0, 3).with_d(2).unwrap()).unwrap(),
        };
        let x = k.eval(z, w).unwrap();
        let y = k.eval(w, z).unwrap().conj();
        let scale = (k.density(z).unwrap() * k.density(w).unwrap()).sqrt();
        prop_assert!((x - y).norm() <= 1e-13 * x.norm().max(scale * 1e-3).max(1e-300));
    }

    #[test]
    fn two_point_function_nonnegative(zr in -1.0f64..1.0, zi in -1.0f64..1.0, wr in -1.0f64..1.0, wi in -1.0f64..1.0) {
        let k = KernelHandle::hat(&pc(0.5, 1.0, 6)).unwrap();
        let (z, w) = (c64(zr, zi), c64(wr, wi));
        let r2 = k.k_point(&[z, w]).unwrap();
        let scale = k.density(z).unwrap() * k.density(w).unwrap();
        prop_assert!(r2 >= -1e-10 * scale);
    }

    #[test]
    fn insertion_recursion_random_points(zr in -2.0f64..2.0, zi in -2.0f64..2.0) {
        let r = insertion_recursion_check(&pc(0.0, 0.5, 5), c64(zr, zi)).unwrap();
        prop_assert!(r.residual < 1e-8);
    }
}
