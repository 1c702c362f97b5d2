mod common;

use common::*;
use lemnis::cdi::*;
use lemnis::kernels::{Convention, KernelHandle};
use lemnis::orthopoly::*;
use lemnis::{Complex64, EnsembleParams, Error};
use proptest::prelude::*;

fn pc(a: f64, c: f64, n: usize) -> EnsembleParams {
    EnsembleParams::new(a, c, n).unwrap()
}

/// Fourth-order central difference of ∂̄ = (∂_x + i∂_y)/2.
fn dbar_fd<F: Fn(Complex64) -> Complex64>(f: F, z: Complex64, h: f64) -> Complex64 {
    let d = |dir: Complex64| {
        (f(z - dir * 2.0 * h) - f(z - dir * h) * 8.0 + f(z + dir * h) * 8.0 - f(z + dir * 2.0 * h)) / (12.0 * h)
    };
    (d(c64(1.0, 0.0)) + d(c64(0.0, 1.0)) * c64(0.0, 1.0)) * 0.5
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn elliptic_grid() -> Vec<Complex64> {
    (0..5).map(|k| Complex64::from_polar(0.15 + 0.17 * k as f64, 0.3 + 1.3 * k as f64)).collect()
}

#[test]
fn elliptic_identity_on_grid() {
    for &tau in &[0.3, 0.7] {
        for &n in &[4usize, 10] {
            let grid = elliptic_grid();
            for &z in &grid {
                for &w in &grid {
                    let r = cd_sides_elliptic(tau, n, z, w).unwrap();
                    assert!(r.residual <= 1e-9, "tau={tau} N={n} z={z} w={w}: {}", r.residual);
                }
            }
        }
    }
}

#[test]
fn elliptic_identity_on_diagonal_point() {
    let r = cd_sides_elliptic(0.5, 6, c64(0.4, 0.0), c64(0.4, 0.0)).unwrap();
    assert!(r.residual <= 1e-9, "{}", r.residual);
}

#[test]
fn elliptic_left_side_is_dbar_of_kernel() {
    let (tau, n) = (0.4, 6);
    let k = KernelHandle::new(hermite_elliptic_basis(tau, n, n).unwrap(), Convention::Tilde, Some(n)).unwrap();
    for &(z, w) in &[(c64(0.3, 0.2), c64(-0.1, 0.4)), (c64(0.5, -0.3), c64(0.6, 0.1))] {
        let fd = dbar_fd(|e| k.eval(z, e).unwrap(), w, 1e-3);
        let r = cd_sides_elliptic(tau, n, z, w).unwrap();
        assert!(rel(fd, r.lhs) < 1e-8, "fd={fd} lhs={}", r.lhs);
    }
}

#[test]
fn elliptic_real_derivative_of_density() {
    let (tau, n) = (0.5, 6);
    let k = KernelHandle::new(hermite_elliptic_basis(tau, n, n).unwrap(), Convention::Tilde, Some(n)).unwrap();
    let h = 1e-4;
    for &z in &[c64(0.3, 0.2), c64(-0.6, 0.1), c64(0.9, -0.4)] {
        let fd = (k.density(z + h).unwrap() - k.density(z - h).unwrap()) / (2.0 * h);
        let closed = dx_density_elliptic(tau, n, z).unwrap();
        let via = dx_density_elliptic_cdi(tau, n, z).unwrap();
        let scale = fd.abs().max(1.0);
        assert!((closed - fd).abs() < 1e-5 * scale, "closed={closed} fd={fd}");
        assert!((closed - via).abs() < 1e-9 * closed.abs().max(1e-12), "closed={closed} via={via}");
    }
}

#[test]
fn exact_c1_identity_at_reference_point() {
    let b = exact_c1_basis(1.0, 6, 8).unwrap();
    let z = c64(1.2, 0.3);
    let r = cd_sides_pointcharge(&b, 6, z, z).unwrap();
    assert!(r.residual <= 1e-8, "{}", r.residual);
}

#[test]
fn point_charge_left_side_is_dbar_of_kernel() {
    for &(a, c) in &[(1.0, 1.0), (0.7, 0.5), (1.0, 2.0)] {
        let n = 6;
        let p = pc(a, c, n);
        let basis = point_charge_basis(&p, n + 1).unwrap();
        let k = KernelHandle::new(basis.clone(), Convention::Tilde, Some(n)).unwrap();
        let z = c64(a + 0.25, 0.3);
        let w = c64(a - 0.2, 0.35);
        let fd = dbar_fd(|e| k.eval(z, e).unwrap(), w, 1e-3);
        let r = cd_sides_pointcharge(&basis, n, z, w).unwrap();
        assert!(rel(fd, r.lhs) < 1e-7, "a={a} c={c}: fd={fd} lhs={}", r.lhs);
    }
}

#[test]
fn quadrature_identity_half_charge() {
    let p = pc(1.0, 0.5, 8);
    let b = point_charge_basis(&p, 10).unwrap();
    for &z in &sample_points_near(1.0, 8, 5) {
        for &w in &sample_points_near(1.0, 8, 5) {
            let r = cd_sides_pointcharge(&b, 8, z, w).unwrap();
            assert!(r.residual <= 1e-6, "z={z} w={w}: {}", r.residual);
        }
    }
}

#[test]
fn quadrature_identity_sweep() {
    for &c in &[-0.5, 0.5, 2.0] {
        for &a in &[0.5, 1.0] {
            for &n in &[6usize, 10] {
                let b = point_charge_basis(&pc(a, c, n), n + 1).unwrap();
                let pts = sample_points_near(a, n, 5);
                for &z in &pts {
                    for &w in &pts {
                        let r = cd_sides_pointcharge(&b, n, z, w).unwrap();
                        assert!(r.residual <= 1e-6, "c={c} a={a} N={n} z={z} w={w}: {}", r.residual);
                    }
                }
            }
        }
    }
}

/// For c = 1, integration by parts gives ḡ_k = b P̄_{k+1}(b) P̄_k(0) with
/// norms taken against dA/π, since ∫ Q e^{−|u|²} dA/π = Q(0) for any polynomial Q.
#[test]
fn c1_norm_gap_matches_integration_by_parts() {
    let (a, n) = (0.5, 10);
    let bsc = (n as f64).sqrt() * a;
    let exact = exact_c1_basis(a, n, n + 4).unwrap();
    let quad = arnoldi_basis(&pc(a, 1.0, n), n + 4, QuadratureOptions::default()).unwrap();
    for basis in [&exact, &quad] {
        for k in 0..n + 2 {
            let gap = basis.scaled_norm_defect(k) * basis.scaled_ln_norm(k).exp();
            let pb = horner(basis.scaled_coeffs(k + 1), c64(bsc, 0.0));
            let p0 = basis.scaled_coeffs(k)[0];
            let want = (pb * p0 * bsc).re;
            assert!((gap - want).abs() < 1e-7 * want.abs(), "{:?} k={k}: {gap} vs {want}", basis.tag());
        }
    }
}

#[test]
fn c1_quadrature_gaps_agree_with_closed_form() {
    let (a, n) = (0.5, 16);
    let exact = exact_c1_basis(a, n, n + 4).unwrap();
    let quad = arnoldi_basis(&pc(a, 1.0, n), n + 4, QuadratureOptions::default()).unwrap();
    let ge = invertibility_check_basis(&exact, n + 2, 0.0).unwrap();
    let gq = invertibility_check_basis(&quad, n + 2, 0.0).unwrap();
    for k in 0..n + 2 {
        let (x, y) = (ge.gaps[k].relative_gap, gq.gaps[k].relative_gap);
        assert!((x - y).abs() < 1e-7 * x, "k={k}: {x} vs {y}");
    }
}

#[test]
fn relations_and_actions_over_sweep() {
    for &c in &[-0.5, 0.5, 1.0, 2.0] {
        for &a in &[0.5, 1.0, 1.5] {
            for &n in &[4usize, 8, 16] {
                let p = pc(a, c, n);
                let size = n + 4;
                let basis = point_charge_basis(&p, size + 1).unwrap();
                let m = build_matrices(&basis, size, DEGENERATE_TOL).unwrap();
                let rel = m.relation_residual();
                assert!(rel <= 1e-8, "c={c} a={a} N={n}: relation {rel}");
                let act = m.action_residuals(&basis, &sample_points_near(a, n, 12)).unwrap();
                assert!(act.a <= 1e-7 && act.b <= 1e-7, "c={c} a={a} N={n}: {act:?}");
            }
        }
    }
}

#[test]
fn subdiagonal_of_a_is_weight_scale() {
    for &(a, c) in &[(1.0, 1.0), (0.5, -0.5), (1.5, 2.0)] {
        let n = 8;
        let basis = point_charge_basis(&pc(a, c, n), n + 5).unwrap();
        let m = build_matrices(&basis, n + 4, DEGENERATE_TOL).unwrap();
        for j in 1..m.window() {
            let v = m.a[(j, j - 1)];
            assert!((v - c64(n as f64, 0.0)).norm() < 1e-10 * n as f64, "row {j}: {v}");
        }
    }
}

#[test]
fn elliptic_subdiagonal_of_b() {
    let (tau, n) = (0.6, 8);
    let basis = hermite_elliptic_basis(tau, n, n + 3).unwrap();
    let m = build_matrices(&basis, n + 2, DEGENERATE_TOL).unwrap();
    for j in 1..m.window() {
        let want = j as f64 * tau / n as f64;
        assert!((m.b[(j, j - 1)] - c64(want, 0.0)).norm() < 1e-12, "row {j}: {}", m.b[(j, j - 1)]);
    }
    assert!(m.relation_residual() <= 1e-8);
}

#[test]
fn elliptic_verification_passes() {
    for &tau in &[0.3, 0.7] {
        for &n in &[4usize, 10] {
            let r = verify_elliptic(tau, n).unwrap();
            assert_eq!(r.status, VerifyStatus::Pass, "{r:?}");
        }
    }
}

#[test]
fn zero_center_is_degenerate_everywhere() {
    let p = pc(0.0, 1.0, 6);
    let basis = point_charge_basis(&p, 11).unwrap();
    assert!(matches!(build_matrices(&basis, 10, DEGENERATE_TOL), Err(Error::Unsupported(_))));
    let flags = detect_degeneracies(&basis, 10, DEGENERATE_TOL).unwrap();
    for j in 1..10 {
        assert!(flags.iter().any(|f| f.index == j), "row {j} not flagged: {flags:?}");
    }
    let rep = invertibility_check_basis(&basis, 10, DEGENERATE_TOL).unwrap();
    assert!(rep.gaps.iter().all(|g| !g.pass));
    assert!(!rep.all_pass);
    let v = verify_point_charge(&p).unwrap();
    assert_eq!(v.status, VerifyStatus::Unsupported);
}

#[test]
fn invertibility_passes_for_regular_case() {
    let basis = exact_c1_basis(1.0, 8, 13).unwrap();
    let m = build_matrices(&basis, 12, DEGENERATE_TOL).unwrap();
    let rep = m.invertibility_check();
    assert!(rep.all_pass, "{rep:?}");
    assert!(m.degeneracy_flags.is_empty());
}

#[test]
fn nondegenerate_path_matches_general_path() {
    let basis = point_charge_basis(&pc(1.0, 0.5, 6), 11).unwrap();
    let g = build_matrices(&basis, 10, DEGENERATE_TOL).unwrap();
    let s = build_matrices_nondegenerate(&basis, 10, DEGENERATE_TOL).unwrap();
    for (x, y) in [(&g.a, &s.a), (&g.b, &s.b), (&g.l, &s.l), (&g.u, &s.u)] {
        for j in 0..10 {
            for k in 0..10 {
                assert_eq!(x[(j, k)], y[(j, k)]);
            }
        }
    }
}

#[test]
fn local_terms_near_charge() {
    let (a, n) = (0.5, 60);
    let basis = exact_c1_basis(a, n, n + 2).unwrap();
    let mut errs = Vec::new();
    for &z in &[c64(-1.0, 0.0), c64(-1.0, 0.5), c64(-0.5, -0.3), c64(0.4, 0.2), c64(0.0, 0.0)] {
        let t = local_terms(&basis, n, z).unwrap();
        assert!(t.term_i.is_finite() && t.term_ii.is_finite() && t.dbar_r.is_finite());
        let r = t.rhs(z);
        assert!((r - t.dbar_r).norm() <= 1e-7 * t.dbar_r.norm().max(1e-3), "z={z}: {r} vs {}", t.dbar_r);
        if z.re < 0.0 {
            errs.push((t.dbar_r - z * (-z.norm_sqr()).exp()).norm());
        }
    }
    let bound = 2.0 / (n as f64).sqrt();
    assert!(errs.iter().all(|e| *e <= bound), "{errs:?}");
}

#[test]
fn identity_refuses_mismatched_mode_count() {
    let b = exact_c1_basis(1.0, 6, 10).unwrap();
    assert!(matches!(cd_sides_pointcharge(&b, 5, c64(1.1, 0.0), c64(1.0, 0.2)), Err(Error::InvalidParam(_))));
}

#[test]
fn report_serialises() {
    let r = verify_point_charge(&pc(1.0, 1.0, 6)).unwrap();
    assert_eq!(r.status, VerifyStatus::Pass, "{r:?}");
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(v["status"], "pass");
    assert!(v["relation_residual"].as_f64().unwrap() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relation_holds_for_random_parameters(a in 0.3f64..1.6, c in -0.6f64..2.5, n in 3usize..9) {
        let basis = point_charge_basis(&pc(a, c, n), n + 5).unwrap();
        let m = build_matrices(&basis, n + 4, DEGENERATE_TOL).unwrap();
        prop_assert!(m.relation_residual() <= 1e-8);
    }

    #[test]
    fn elliptic_identity_random_points(tau in 0.05f64..0.95, n in 2usize..12, x in -0.8f64..0.8, y in -0.8f64..0.8) {
        let r = cd_sides_elliptic(tau, n, c64(x, y), c64(0.5 * y, -0.3 * x)).unwrap();
        prop_assert!(r.residual <= 1e-9);
    }
}
