#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use lemnis::orthopoly::*;
use lemnis::{Complex64, EnsembleParams};
use proptest::prelude::*;

fn pc(a: f64, c: f64, n: usize) -> EnsembleParams {
    EnsembleParams::new(a, c, n).unwrap()
}

#[test]
fn gram_gaussian_moments_with_half_charge_at_origin() {
    let p = pc(0.0, 0.5, 5);
    let g = compute_gram(&p, 8).unwrap();
    for j in 0..8 {
        let want = gamma_oracle(j as f64 + 1.5) / 5f64.powf(j as f64 + 1.5);
        assert!((g.entry(j, j).re - want).abs() < 1e-12 * want, "j={j}");
        for k in 0..j {
            assert!(g.entry(j, k).norm() < 1e-13 * want);
        }
    }
}

#[test]
fn gram_unit_charge_matches_expanded_moments() {
    // |ζ−a|² = |ζ|² − aζ − aζ̄ + a² against e^{−N|ζ|²}
    let (a, n) = (0.6, 4usize);
    let nf = n as f64;
    let g = compute_gram(&pc(a, 1.0, n), 5).unwrap();
    for j in 0..5 {
        for k in 0..5 {
            let mom = |p: usize| factorial(p) / nf.powi(p as i32 + 1);
            let mut want = 0.0;
            if j == k {
                want += mom(j + 1) + a * a * mom(j);
            }
            if j + 1 == k {
                want -= a * mom(k);
            }
            if k + 1 == j {
                want -= a * mom(j);
            }
            let got = g.entry(j, k);
            assert!((got - c64(want, 0.0)).norm() < 1e-13 * g.entry(j, j).re.max(g.entry(k, k).re), "{j},{k}");
        }
    }
}

#[test]
fn gram_quadrature_matches_binomial_closed_form() {
    for &a in &[0.5, 1.0] {
        for &c in &[1.0, 2.0] {
            let p = pc(a, c, 8);
            let q = compute_gram(&p, 13).unwrap();
            let e = gram_integer_charge(&p, 13).unwrap();
            for j in 0..13 {
                for k in 0..13 {
                    let scale = (q.scaled_entry(j, j).re * q.scaled_entry(k, k).re).sqrt();
                    let d = (q.scaled_entry(j, k) - e.scaled_entry(j, k)).norm();
                    assert!(d < 1e-10 * scale, "a={a} c={c} ({j},{k}) {d:e}");
                }
            }
        }
    }
}

#[test]
fn degree_zero_basis_is_constant_with_mass_norm() {
    let p = pc(0.7, 0.5, 6);
    let g = compute_gram(&p, 3).unwrap();
    let b = monic_basis_from_gram(&g, 2).unwrap();
    assert_eq!(b.coeffs(0), vec![c64(1.0, 0.0)]);
    assert!((b.norm(0) - g.entry(0, 0).re).abs() < 1e-15 * b.norm(0));
}

#[test]
fn radial_charge_basis_is_monomial() {
    let b = radial_basis(&pc(0.0, 0.5, 7), 10).unwrap();
    assert_eq!(b.tag(), ConstructionTag::Radial);
    for j in 0..=10 {
        let cs = b.coeffs(j);
        assert!(cs[..j].iter().all(|c| c.norm() == 0.0));
        let want = gamma_oracle(j as f64 + 1.5) / 7f64.powf(j as f64 + 1.5);
        assert!((b.norm(j) - want).abs() < 1e-12 * want);
    }
}

#[test]
fn quadrature_basis_at_origin_is_monomial() {
    for &c in &[-0.5, 0.5, 2.0] {
        let g = compute_gram(&pc(0.0, c, 9), 15).unwrap();
        let b = monic_basis_from_gram(&g, 14).unwrap();
        for j in 0..15 {
            let cs = b.scaled_coeffs(j);
            for m in 0..j {
                assert!(cs[m].norm() < 1e-10, "c={c} j={j} m={m}");
            }
            if j > 0 {
                let ratio = (b.ln_norm(j) - b.ln_norm(j - 1)).exp();
                assert!((ratio - (j as f64 + c) / 9.0).abs() < 1e-11 * ratio);
            }
        }
    }
}

#[test]
fn exact_c1_value_at_charge() {
    let (a, n) = (0.8, 5usize);
    let b = exact_c1_basis(a, n, 10).unwrap();
    let x = a * a * n as f64;
    for k in 0..=10 {
        let q: f64 = (0..=k).map(|m| (-x).exp() * x.powi(m as i32) / factorial(m)).sum();
        let want = a.powi(k as i32) * (k as f64 + 1.0 - x + (-x).exp() * x.powi(k as i32 + 1) / factorial(k) / q);
        let got = horner(&b.coeffs(k), c64(a, 0.0));
        assert!((got.re - want).abs() < 1e-11 * want.abs().max(1.0), "k={k} {got} {want}");
    }
}

#[test]
fn quadrature_basis_matches_exact_c1() {
    for &a in &[0.5, 1.0] {
        for &n in &[4usize, 8] {
            let g = compute_gram(&pc(a, 1.0, n), 13).unwrap();
            let q = monic_basis_from_gram(&g, 12).unwrap();
            let e = exact_c1_basis(a, n, 12).unwrap();
            for j in 0..=12 {
                let (cq, ce) = (q.scaled_coeffs(j), e.scaled_coeffs(j));
                let scale = ce.iter().map(|c| c.norm()).fold(0.0, f64::max);
                for m in 0..=j {
                    assert!((cq[m] - ce[m]).norm() < 1e-7 * scale, "a={a} N={n} j={j} m={m}");
                }
                let rel = (q.scaled_ln_norm(j) - e.scaled_ln_norm(j)).abs();
                assert!(rel < 1e-8, "norm a={a} N={n} j={j}");
            }
        }
    }
}

/// max_{j,k} |⟨P_j,P_k⟩ − h_j δ_jk| / h_j against an independent polar quadrature.
fn gram_residual(b: &OPBasis, n: usize) -> f64 {
    let p = b.params();
    let (a, c, nn) = (p.a, p.c, p.n as f64);
    let coeffs: Vec<Vec<Complex64>> = (0..=n).map(|j| b.coeffs(j)).collect();
    let r_max = (((n as f64) + c.abs() + 60.0) / nn).sqrt() + a;
    let mut worst: f64 = 0.0;
    let ips = polar_gram(&coeffs, c64(a, 0.0), r_max, 4 * n + 160, |z, off| {
        off.norm().powf(2.0 * c) * (-nn * z.norm_sqr()).exp()
    });
    for j in 0..=n {
        let hj = b.norm(j);
        for k in 0..=n {
            let want = if j == k { hj } else { 0.0 };
            worst = worst.max((ips[j][k] - c64(want, 0.0)).norm() / hj);
        }
    }
    worst
}

#[test]
fn orthogonality_residual_sweep() {
    for &a in &[0.0, 0.5, 1.0] {
        for &c in &[-0.5, 0.5, 1.0, 2.0] {
            let p = pc(a, c, 8);
            let g = compute_gram(&p, 13).unwrap();
            let b = monic_basis_from_gram(&g, 12).unwrap();
            let r = gram_residual(&b, 12);
            assert!(r < 1e-8, "a={a} c={c} residual {r:e}");
        }
    }
}

#[test]
fn orthogonality_residual_degree_twenty() {
    let p = pc(0.5, 0.5, 16);
    let g = compute_gram(&p, 21).unwrap();
    let b = monic_basis_from_gram(&g, 20).unwrap();
    let r = gram_residual(&b, 20);
    assert!(r < 1e-8, "residual {r:e}");
}

#[test]
fn hermite_basis_orthogonal_under_elliptic_weight() {
    let (tau, n) = (0.5, 6usize);
    let b = hermite_elliptic_basis(tau, n, 6).unwrap();
    assert_eq!(b.coeffs(1), vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
    let k = n as f64 / (1.0 - tau * tau);
    let coeffs: Vec<Vec<Complex64>> = (0..=6).map(|j| b.coeffs(j)).collect();
    let g = polar_gram(&coeffs, c64(0.0, 0.0), 4.5, 256, |z, _| (-k * (z.norm_sqr() - tau * (z * z).re)).exp());
    for j in 0..=6 {
        for l in 0..=6 {
            let want = if j == l { b.norm(j) } else { 0.0 };
            assert!((g[j][l] - c64(want, 0.0)).norm() < 1e-10 * b.norm(j), "{j},{l}");
        }
    }
    let want = 0.75f64.sqrt() * factorial(3) / 6f64.powi(4);
    assert!((b.norm(3) - want).abs() < 1e-15 * want);
}

#[test]
fn lemniscate_child_identity_fold() {
    // d = 1: the child is the basis for |ζ|^{2c} e^{−N|ζ−a|²}, i.e.
    // (−1)^j P_j(a − ζ) with P_j the basis for |ζ−a|^{2c} e^{−N|ζ|²}
    let a = 0.6;
    let p = pc(a, 0.5, 5);
    let parent = point_charge_basis(&p, 4).unwrap();
    let child = lemniscate_child_basis(&p, 4, point_charge_basis).unwrap();
    for j in 0..=4 {
        let pc = parent.coeffs(j);
        let mut want = vec![c64(0.0, 0.0); j + 1];
        for (i, ci) in pc.iter().enumerate() {
            // ci (a − ζ)^i
            for m in 0..=i {
                let binom = factorial(i) / (factorial(m) * factorial(i - m));
                let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
                want[m] += ci * binom * a.powi((i - m) as i32) * sgn;
            }
        }
        let sj = if j % 2 == 0 { 1.0 } else { -1.0 };
        for (x, y) in child.coeffs(j).iter().zip(&want) {
            assert!((x - y * sj).norm() < 1e-12 * y.norm().max(1.0), "j={j} {x} {y}");
        }
        assert!((child.ln_norm(j) - parent.ln_norm(j)).abs() < 1e-14);
    }
}

#[test]
fn lemniscate_residue_charges() {
    assert_eq!(residue_charge(0.0, 0, 2), -0.5);
    assert_eq!(residue_charge(0.0, 1, 2), 0.0);
    let p = pc(0.9, 0.0, 3).with_d(2).unwrap();
    let b = lemniscate_basis(&p).unwrap();
    assert_eq!(b.parents()[0].params().c, -0.5);
    assert_eq!(b.parents()[1].params().c, 0.0);
}

#[test]
fn lemniscate_child_orthonormality() {
    for &(d, a, c) in &[(2usize, 0.9, 1.0), (2, 0.5, 0.0), (3, 1.1, 0.5)] {
        let n = 3usize;
        let p = pc(a, c, n).with_d(d).unwrap();
        let b = lemniscate_basis(&p).unwrap();
        let nn = n as f64;
        let coeffs: Vec<Vec<Complex64>> = (0..b.len()).map(|k| b.coeffs(k)).collect();
        let r_max = (a + (60.0 / nn).sqrt()).powf(1.0 / d as f64);
        let g = polar_gram(&coeffs, c64(0.0, 0.0), r_max, 512, |z, _| {
            z.norm().powf(2.0 * c) * (-nn * (z.powu(d as u32) - a).norm_sqr()).exp()
        });
        for j in 0..b.len() {
            for k in 0..b.len() {
                let want = if j == k { 1.0 } else { 0.0 };
                let got = g[j][k] / (b.norm(j) * b.norm(k)).sqrt();
                assert!((got - c64(want, 0.0)).norm() < 1e-8, "d={d} a={a} c={c} ({j},{k}) {got}");
            }
        }
    }
}

#[test]
fn psi_phi_conventions() {
    let b = point_charge_basis(&pc(0.5, 0.0, 4), 3).unwrap();
    let z = c64(0.3, 0.2);
    let pp = b.eval_psi_phi(z).unwrap();
    assert_eq!(pp.psi, b.eval_poly(z));
    let b1 = exact_c1_basis(0.5, 4, 3).unwrap();
    let pp = b1.eval_psi_phi(c64(0.9, 0.0)).unwrap();
    assert!(pp.psi.iter().all(|v| v.im == 0.0));
    let bneg = point_charge_basis(&pc(0.5, -0.5, 4), 3).unwrap();
    assert!(bneg.eval_psi_phi(c64(0.5, 0.0)).is_err());
}

#[test]
fn basis_json_dump() {
    let b = exact_c1_basis(0.5, 4, 2).unwrap();
    let v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
    assert_eq!(v["construction_tag"], "exact_c1");
    assert_eq!(v["degree_max"], 2);
    assert_eq!(v["coeffs"][2][2][0], 1.0);
    assert_eq!(v["params"]["N"], 4);
}

#[test]
fn resolution_error_on_starved_quadrature() {
    let p = pc(1.0, 0.5, 8);
    let g = compute_gram_with(&p, 30, QuadratureOptions { radial_nodes: Some(4), angular_nodes: Some(8) }).unwrap();
    assert!(matches!(monic_basis_from_gram(&g, 29), Err(lemnis::Error::Resolution(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monic_and_positive(a in 0.0f64..1.5, c in -0.9f64..3.0, n in 2usize..12) {
        let g = compute_gram(&pc(a, c, n), 9).unwrap();
        let b = monic_basis_from_gram(&g, 8).unwrap();
        for j in 0..=8 {
            prop_assert_eq!(b.scaled_coeffs(j)[j], c64(1.0, 0.0));
            prop_assert!(b.ln_norm(j).is_finite());
        }
    }

    #[test]
    fn gram_is_hermitian(a in 0.0f64..1.5, c in -0.9f64..3.0) {
        let g = compute_gram(&pc(a, c, 6), 7).unwrap();
        let m = g.normalized();
        for j in 0..7 {
            for k in 0..7 {
                prop_assert_eq!(m[(j, k)], m[(k, j)].conj());
            }
            prop_assert!(m[(j, j)].re > 0.0);
        }
    }

    #[test]
    fn radial_ratio(c in -0.9f64..4.0, n in 1usize..40, j in 0usize..30) {
        let b = radial_basis(&pc(0.0, c, n), j + 1).unwrap();
        let ratio = (b.ln_norm(j + 1) - b.ln_norm(j)).exp();
        let want = (j as f64 + c + 1.0) / n as f64;
        prop_assert!((ratio - want).abs() < 1e-12 * want);
    }
}
