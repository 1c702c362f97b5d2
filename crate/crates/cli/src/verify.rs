//! Identity and convergence suites behind `lemnis verify`.

use std::collections::BTreeMap;
use std::sync::Arc;

use lemnis::cdi::{
    verify_elliptic, verify_point_charge, CdiReport, VerifyStatus, ACTION_TOL, ELLIPTIC_TOL, IDENTITY_TOL, RELATION_TOL,
};
use lemnis::droplet::{equilibrium_mass, DropletSpec};
use lemnis::kernels::{fold2_relations_check, insertion_recursion_check, multifold_check};
use lemnis::limits::{
    bulk_convergence_sup, disc_grid, edge_convergence_sup, edge_density_c1_closed, edge_density_c2_closed,
    edge_from_painleve, normalize_c, EdgeRecursionState, MockHandle, PainleveInput, ZeroHandle, NORMALIZE_PROBE,
    NORMALIZE_STABILITY,
};
use lemnis::specfun::{gamma_fn, lower_reg_gamma_real, mittag_leffler, mittag_leffler_scaled};
use lemnis::{Complex64, EnsembleParams};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Params, Suite};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Unsupported,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub check: String,
    pub status: Status,
    pub residual: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub status: Status,
    pub results: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn exit_error(&self) -> Option<CliError> {
        let failed: Vec<String> = self
            .results
            .iter()
            .filter(|r| r.status == Status::Fail)
            .map(|r| format!("{} [{}]", r.suite, r.check))
            .collect();
        match self.status {
            Status::Pass => None,
            Status::Fail => Some(CliError::Verification(failed.join(", "))),
            Status::Unsupported => Some(CliError::Unsupported("some checks are outside the supported regime".into())),
        }
    }
}

struct Ctx<'a> {
    p: &'a Params,
    tol: &'a BTreeMap<Suite, f64>,
}

impl Ctx<'_> {
    fn threshold(&self, suite: Suite, default: f64) -> f64 {
        self.tol.get(&suite).copied().unwrap_or(default)
    }
}

fn from_residual(suite: Suite, check: String, r: lemnis::Result<f64>, threshold: f64) -> CheckResult {
    match r {
        Ok(v) => CheckResult {
            suite: suite.name(),
            check,
            status: if v <= threshold { Status::Pass } else { Status::Fail },
            residual: Some(v),
            threshold: Some(threshold),
            message: None,
            detail: None,
        },
        Err(e) => from_error(suite, check, e),
    }
}

fn from_error(suite: Suite, check: String, e: lemnis::Error) -> CheckResult {
    CheckResult {
        suite: suite.name(),
        check,
        status: if e.is_unsupported() { Status::Unsupported } else { Status::Fail },
        residual: None,
        threshold: None,
        message: Some(e.to_string()),
        detail: None,
    }
}

fn from_cdi(suite: Suite, check: String, r: lemnis::Result<CdiReport>, threshold: f64) -> CheckResult {
    let rep = match r {
        Ok(rep) => rep,
        Err(e) => return from_error(suite, check, e),
    };
    let status = match rep.status {
        VerifyStatus::Unsupported => Status::Unsupported,
        _ => {
            let rel = rep.relation_residual.is_some_and(|v| v <= RELATION_TOL);
            let act = rep.action_residuals.as_ref().is_some_and(|a| a.a <= ACTION_TOL && a.b <= ACTION_TOL);
            let id = rep.identity_residual.is_some_and(|v| v <= threshold);
            let inv = rep.invertibility.as_ref().map_or(true, |i| i.all_pass);
            if rel && act && id && inv {
                Status::Pass
            } else {
                Status::Fail
            }
        }
    };
    CheckResult {
        suite: suite.name(),
        check,
        status,
        residual: rep.identity_residual,
        threshold: Some(threshold),
        message: rep.message.clone(),
        detail: serde_json::to_value(&rep).ok(),
    }
}

fn list<T: Copy>(v: Option<T>, defaults: &[T]) -> Vec<T> {
    v.map(|x| vec![x]).unwrap_or_else(|| defaults.to_vec())
}

/// Deterministic spread of points in the disc |z| ≤ radius.
fn spiral(count: usize, radius: f64) -> Vec<Complex64> {
    (0..count)
        .map(|k| {
            let r = radius * ((k as f64 + 0.5) / count as f64).sqrt();
            Complex64::from_polar(r, 2.399_963_229_728_653 * k as f64 + 0.3)
        })
        .collect()
}

fn elliptic(cx: &Ctx) -> Vec<CheckResult> {
    let t = cx.threshold(Suite::Elliptic, ELLIPTIC_TOL);
    let mut out = Vec::new();
    for tau in list(cx.p.tau, &[0.3, 0.7]) {
        for n in list(cx.p.n, &[4, 10]) {
            out.push(from_cdi(Suite::Elliptic, format!("tau={tau} N={n}"), verify_elliptic(tau, n), t));
        }
    }
    out
}

fn cdi(cx: &Ctx) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for c in list(cx.p.c, &[1.0, -0.5, 0.5, 2.0]) {
        let t = cx.threshold(Suite::Cdi, if c == 1.0 { 1e-8 } else { IDENTITY_TOL });
        for a in list(cx.p.a, &[0.5, 1.0]) {
            for n in list(cx.p.n, &[6, 10]) {
                let r = EnsembleParams::new(a, c, n).and_then(|p| verify_point_charge(&p));
                out.push(from_cdi(Suite::Cdi, format!("a={a} c={c} N={n}"), r, t));
            }
        }
    }
    out
}

fn insertion(cx: &Ctx) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for a in list(cx.p.a, &[0.0, 0.8]) {
        let t = cx.threshold(Suite::Insertion, if a == 0.0 { 1e-8 } else { 1e-6 });
        for c in list(cx.p.c, &[0.5]) {
            for n in list(cx.p.n, &[6]) {
                let r = EnsembleParams::new(a, c, n).and_then(|p| {
                    spiral(20, 2.0)
                        .into_iter()
                        .map(|z| insertion_recursion_check(&p, z).map(|chk| chk.residual))
                        .try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))
                });
                out.push(from_residual(Suite::Insertion, format!("a={a} c={c} N={n}, 20 points"), r, t));
            }
        }
    }
    out
}

fn multifold(cx: &Ctx) -> Vec<CheckResult> {
    let pairs = [
        (Complex64::new(0.5, 0.3), Complex64::new(0.7, -0.2)),
        (Complex64::new(0.3, 0.4), Complex64::new(0.5, -0.1)),
        (Complex64::new(-0.6, 0.2), Complex64::new(0.1, 0.8)),
        (Complex64::new(0.8, 0.0), Complex64::new(0.8, 0.0)),
    ];
    let mut out = Vec::new();
    for a in list(cx.p.a, &[0.0, 0.9]) {
        let t = cx.threshold(Suite::Multifold, if a == 0.0 { 1e-9 } else { 1e-6 });
        for d in list(cx.p.d, &[2, 3]) {
            for n in list(cx.p.n, &[4, 6]) {
                let c = cx.p.c.unwrap_or(1.0);
                let params = EnsembleParams::new(a, c, n).and_then(|p| p.with_d(d));
                let r = params.as_ref().map_err(clone_err).and_then(|p| {
                    pairs
                        .iter()
                        .map(|(z, w)| multifold_check(p, *z, *w).map(|chk| chk.residual))
                        .try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))
                });
                out.push(from_residual(Suite::Multifold, format!("a={a} c={c} d={d} N={n}"), r, t));
                if d == 2 {
                    let r = params.as_ref().map_err(clone_err).and_then(|p| {
                        pairs
                            .iter()
                            .map(|(z, w)| fold2_relations_check(p, *z, *w).map(|c| c[0].residual.max(c[1].residual)))
                            .try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))
                    });
                    out.push(from_residual(Suite::Multifold, format!("two-fold relations a={a} c={c} N={n}"), r, t));
                }
            }
        }
    }
    out
}

fn clone_err(e: &lemnis::Error) -> lemnis::Error {
    lemnis::Error::InvalidParam(e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn specfun(cx: &Ctx) -> Vec<CheckResult> {
    let recurrence = || -> lemnis::Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..30 {
            let c = -0.85 + 5.8 * k as f64 / 29.0;
            for j in 1..=40 {
                let x = 0.5 * j as f64;
                let lhs = lower_reg_gamma_real(c + 1.0, x)?;
                let rhs = lower_reg_gamma_real(c, x)? - (c * x.ln() - x).exp() / gamma_fn(c + 1.0)?;
                worst = worst.max(rel(lhs, rhs));
            }
        }
        Ok(worst)
    };
    let ml_form = || -> lemnis::Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let c = -0.85 + 3.8 * k as f64 / 19.0;
            for j in 1..=80 {
                let x = 0.25 * j as f64;
                let ml = (c * x.ln() - x).exp() * mittag_leffler(1.0, 1.0 + c, x)?;
                worst = worst.max(rel(ml, lower_reg_gamma_real(c, x)?));
            }
        }
        Ok(worst)
    };
    let splitting = || -> lemnis::Result<f64> {
        let mut worst: f64 = 0.0;
        for d in [2usize, 3] {
            let df = d as f64;
            for c in [-0.5, 0.0, 0.5, 1.0, 2.0] {
                for k in 0..=100 {
                    let x = 0.1 * k as f64;
                    let mut lhs = 0.0;
                    for l in 0..d {
                        lhs +=
                            x.powi(l as i32) * mittag_leffler_scaled(1.0, (c + l as f64 + 1.0) / df, x.powi(d as i32))?;
                    }
                    worst = worst.max(rel(lhs, mittag_leffler_scaled(1.0 / df, (1.0 + c) / df, x)?));
                }
            }
        }
        Ok(worst)
    };
    vec![
        from_residual(Suite::Specfun, "P(c+1,x) recurrence".into(), recurrence(), cx.threshold(Suite::Specfun, 1e-11)),
        from_residual(Suite::Specfun, "P as Mittag-Leffler".into(), ml_form(), cx.threshold(Suite::Specfun, 1e-10)),
        from_residual(
            Suite::Specfun,
            "Mittag-Leffler splitting d=2,3".into(),
            splitting(),
            cx.threshold(Suite::Specfun, 1e-10),
        ),
    ]
}

fn edge(cx: &Ctx) -> Vec<CheckResult> {
    let pts = spiral(50, 3.0);
    let t = cx.threshold(Suite::Edge, 1e-10);
    let check = |m: usize, closed: fn(Complex64) -> f64| -> lemnis::Result<f64> {
        let st = EdgeRecursionState::at_charge(0.0, m)?;
        Ok(pts.iter().map(|z| (st.density(*z) - closed(*z)).abs()).fold(0.0, f64::max))
    };
    vec![
        from_residual(Suite::Edge, "one step vs closed form, 50 points".into(), check(1, edge_density_c1_closed), t),
        from_residual(Suite::Edge, "two steps vs closed form, 50 points".into(), check(2, edge_density_c2_closed), t),
    ]
}

fn bulk_convergence(cx: &Ctx) -> Vec<CheckResult> {
    let (a, c) = (cx.p.a.unwrap_or(0.5), cx.p.c.unwrap_or(1.0));
    let t = cx.threshold(Suite::BulkConvergence, 0.05);
    let ns = list(cx.p.n, &[10, 20, 40]);
    let grid = disc_grid(2.0, 20, 32);
    let sups: lemnis::Result<Vec<f64>> = ns.iter().map(|n| bulk_convergence_sup(c, a, *n, &grid)).collect();
    let check = format!("a={a} c={c} N={ns:?}, sup over |z|<=2");
    match sups {
        Err(e) => vec![from_error(Suite::BulkConvergence, check, e)],
        Ok(s) => {
            let monotone = s.windows(2).all(|w| w[1] < w[0]);
            let last = *s.last().unwrap_or(&f64::NAN);
            let mut r = from_residual(Suite::BulkConvergence, check, Ok(last), t);
            if !monotone {
                r.status = Status::Fail;
                r.message = Some("sup deviation is not decreasing in N".into());
            }
            r.detail = Some(serde_json::json!({ "N": ns, "sup": s }));
            vec![r]
        }
    }
}

fn edge_convergence(cx: &Ctx) -> Vec<CheckResult> {
    let (n, s) = (cx.p.n.unwrap_or(100), cx.p.s.unwrap_or(0.0));
    let grid: Vec<Complex64> = (0..=80).map(|k| Complex64::new(-2.0 + 0.05 * k as f64, 0.0)).collect();
    let t = cx.threshold(Suite::EdgeConvergence, 0.05);
    vec![from_residual(
        Suite::EdgeConvergence,
        format!("c=0 N={n} S={s}, sup over Re z in [-2,2]"),
        edge_convergence_sup(n, s, &grid),
        t,
    )]
}

fn droplet(cx: &Ctx) -> Vec<CheckResult> {
    let t = cx.threshold(Suite::Droplet, 1e-6);
    let mut out = Vec::new();
    for d in list(cx.p.d, &[1, 2, 3]) {
        for a in list(cx.p.a, &[0.0, 0.9, 1.0, 1.1]) {
            let r = DropletSpec::new(d, a).and_then(|s| equilibrium_mass(&s)).map(|m| (m - 1.0).abs());
            out.push(from_residual(Suite::Droplet, format!("mass d={d} a={a}"), r, t));
        }
    }
    out
}

fn painleve(cx: &Ctx) -> Vec<CheckResult> {
    let (c, s) = (cx.p.c.unwrap_or(-0.5), cx.p.s.unwrap_or(0.0));
    let mock = MockHandle::new(c, s);
    let input = match PainleveInput::new(Arc::new(mock), c, s) {
        Ok(i) => i,
        Err(e) => return vec![from_error(Suite::Painleve, format!("mock c={c} S={s}"), e)],
    };
    let t = |d| cx.threshold(Suite::Painleve, d);
    let mut out = Vec::new();
    let norm = normalize_c(&input, NORMALIZE_PROBE)
        .and_then(|c8| normalize_c(&input, NORMALIZE_PROBE + 2.0).map(|c10| (c8, c10)));
    out.push(from_residual(
        Suite::Painleve,
        "normalization stable between probes 8 and 10".into(),
        norm.as_ref().map(|(a, b)| rel(*b, *a)).map_err(clone_err),
        NORMALIZE_STABILITY,
    ));
    out.push(from_residual(
        Suite::Painleve,
        "normalization matches the mock constant".into(),
        norm.as_ref().map(|(a, _)| rel(*a, mock.exact_c())).map_err(clone_err),
        t(1e-10),
    ));
    let probe = Complex64::new(0.7, 0.3);
    let lin = edge_from_painleve(&input.clone().with_c_const(1.3), probe).and_then(|one| {
        edge_from_painleve(&input.clone().with_c_const(2.6), probe).map(|two| rel(two.value, 2.0 * one.value))
    });
    out.push(from_residual(Suite::Painleve, "linear in C".into(), lin, t(1e-12)));
    let closed = [Complex64::new(-1.5, 0.0), Complex64::new(0.3, 0.0), Complex64::new(1.2, 0.7)]
        .iter()
        .map(|z| {
            edge_from_painleve(&input.clone().with_c_const(mock.exact_c()), *z)
                .map(|v| (v.value - mock.exact_density(*z)).abs())
        })
        .try_fold(0.0f64, |m, r| r.map(|v| m.max(v)));
    out.push(from_residual(Suite::Painleve, "mock closed form".into(), closed, t(1e-10)));
    let zero = PainleveInput::new(Arc::new(ZeroHandle), c, s).and_then(|i| normalize_c(&i, NORMALIZE_PROBE));
    out.push(CheckResult {
        suite: Suite::Painleve.name(),
        check: "zero map rejected".into(),
        status: if matches!(zero, Err(lemnis::Error::Numeric(_))) { Status::Pass } else { Status::Fail },
        residual: None,
        threshold: None,
        message: Some(match zero {
            Ok(v) => format!("zero map normalized to {v}"),
            Err(e) => e.to_string(),
        }),
        detail: None,
    });
    out
}

pub const ALL: [Suite; 10] = [
    Suite::Specfun,
    Suite::Elliptic,
    Suite::Cdi,
    Suite::Insertion,
    Suite::Multifold,
    Suite::Edge,
    Suite::BulkConvergence,
    Suite::EdgeConvergence,
    Suite::Droplet,
    Suite::Painleve,
];

pub fn run(p: &Params, only: &[Suite], tol: &BTreeMap<Suite, f64>) -> Result<VerifyReport, CliError> {
    let cx = Ctx { p, tol };
    let suites: Vec<Suite> = if only.is_empty() { ALL.to_vec() } else { only.to_vec() };
    let mut results = Vec::new();
    for s in suites {
        results.extend(match s {
            Suite::Elliptic => elliptic(&cx),
            Suite::Cdi => cdi(&cx),
            Suite::Insertion => insertion(&cx),
            Suite::Multifold => multifold(&cx),
            Suite::Specfun => specfun(&cx),
            Suite::Edge => edge(&cx),
            Suite::BulkConvergence => bulk_convergence(&cx),
            Suite::EdgeConvergence => edge_convergence(&cx),
            Suite::Droplet => droplet(&cx),
            Suite::Painleve => painleve(&cx),
        });
    }
    let status = results.iter().map(|r| r.status).max().unwrap_or(Status::Pass);
    Ok(VerifyReport { status, results })
}
