//! density, sample and droplet commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lemnis::droplet::{boundary_points, equilibrium_mass, in_droplet, DropletSpec};
use lemnis::export::{sidecar, write_boundary, write_profile, write_sample};
use lemnis::kernels::ProfileKind;
use lemnis::limits::{
    bulk_density_hat, bulk_density_lemniscate, edge_density_c0, edge_from_painleve, finite_n_edge_profile, normalize_c,
    EdgeRecursionState, LemniscateEdge, LemniscateMode, MockHandle, PainleveHandle, PainleveInput, TabulatedHandle,
    NORMALIZE_PROBE,
};
use lemnis::sampler::{default_region, empirical_histogram, sample_projection_dpp, sample_radial};
use lemnis::{Complex64, DensityProfile, EnsembleParams, KernelHandle, Rescaling};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{DensityKind, Grid, Params};
use crate::error::CliError;

/// Tolerance for mass_check.
pub const MASS_TOL: f64 = 1e-6;

pub struct PainleveOpts {
    pub file: Option<PathBuf>,
    pub mock: bool,
    pub c_const: Option<f64>,
}

fn nonneg_integer(c: f64) -> Option<usize> {
    (c >= 0.0 && c.fract() == 0.0).then_some(c as usize)
}

fn sup_gap(profile: &DensityProfile, limit: impl Fn(Complex64) -> lemnis::Result<f64> + Sync) -> Result<f64, CliError> {
    let gaps = profile
        .grid
        .par_iter()
        .zip(&profile.values)
        .map(|(z, v)| Ok((v - limit(*z)?).abs()))
        .collect::<lemnis::Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().filter(|g| g.is_finite()).fold(0.0, f64::max))
}

fn origin_only(rescaling: Option<Rescaling>, what: &str) -> Result<(), CliError> {
    match rescaling {
        None | Some(Rescaling::Origin) => Ok(()),
        Some(r) => Err(CliError::Usage(format!("{what} is defined in origin coordinates, got rescaling {r:?}"))),
    }
}

fn limit_profile(grid: Vec<Complex64>, values: Vec<f64>, params: EnsembleParams, kind: ProfileKind) -> DensityProfile {
    DensityProfile { grid, values, params, kind, rescaling: Rescaling::Origin, n_terms: None }
}

pub fn density(
    p: &Params,
    grid: &Grid,
    kind: DensityKind,
    rescaling: Option<Rescaling>,
    painleve: &PainleveOpts,
    out: &Path,
) -> Result<Value, CliError> {
    if p.tau.is_some() {
        return Err(CliError::Usage("--tau is only used by verify".into()));
    }
    let pts = grid.points();
    let mut summary = Map::new();
    let profile = match kind {
        DensityKind::FiniteN => {
            let params = p.ensemble(0.5, 0.0, 40, 1)?;
            let (c, n, d) = (params.c, params.n, params.d);
            match params.s_crit {
                Some(s) if d == 1 => {
                    origin_only(rescaling, "the edge profile")?;
                    let prof = finite_n_edge_profile(c, n, s, &pts)?;
                    if c == 0.0 {
                        summary.insert(
                            "sup_gap_vs_edge_limit".into(),
                            json!(sup_gap(&prof, |z| Ok(edge_density_c0(z, s)))?),
                        );
                    } else if let Some(m) = nonneg_integer(c) {
                        let st = EdgeRecursionState::at_charge(s, m)?;
                        summary.insert("sup_gap_vs_edge_limit".into(), json!(sup_gap(&prof, |z| Ok(st.density(z)))?));
                    }
                    prof
                }
                Some(s) => {
                    origin_only(rescaling, "the edge profile")?;
                    let values = LemniscateEdge::new(d, c, s, LemniscateMode::FiniteN { n })?.profile(&pts)?;
                    let mut prof = limit_profile(pts, values, params, ProfileKind::FiniteN);
                    prof.n_terms = Some(d * n);
                    prof
                }
                None => {
                    let mode = rescaling.unwrap_or(Rescaling::Origin);
                    let h = KernelHandle::for_params(&params)?;
                    let prof = h.density_profile(&pts, mode)?;
                    if mode == Rescaling::Origin {
                        let gap = if d == 1 {
                            sup_gap(&prof, |z| bulk_density_hat(c, z))?
                        } else {
                            sup_gap(&prof, |z| bulk_density_lemniscate(d, c, z))?
                        };
                        summary.insert("sup_gap_vs_bulk_limit".into(), json!(gap));
                    }
                    prof
                }
            }
        }
        DensityKind::BulkLimit => {
            origin_only(rescaling, "the bulk limit")?;
            let params = p.ensemble(0.5, 0.0, 40, 1)?;
            let (c, d) = (params.c, params.d);
            let values = pts
                .par_iter()
                .map(|z| if d == 1 { bulk_density_hat(c, *z) } else { bulk_density_lemniscate(d, c, *z) })
                .collect::<lemnis::Result<Vec<f64>>>()?;
            limit_profile(pts, values, params, ProfileKind::LimitBulk)
        }
        DensityKind::EdgeLimit => {
            origin_only(rescaling, "the edge limit")?;
            if p.a.is_some() {
                return Err(CliError::Usage("the edge limit is parameterised by --S, not --a".into()));
            }
            let s = p.s.unwrap_or(0.0);
            let params =
                EnsembleParams::critical(p.c.unwrap_or(0.0), p.n.unwrap_or(40), s)?.with_d(p.d.unwrap_or(1))?;
            let (c, d) = (params.c, params.d);
            if d > 1 {
                let values = LemniscateEdge::new(d, c, s, LemniscateMode::ClosedFormInteger)?.profile(&pts)?;
                limit_profile(pts, values, params, ProfileKind::LimitEdge)
            } else if let Some(m) = nonneg_integer(c) {
                EdgeRecursionState::at_charge(s, m)?.density_profile(&pts, params)
            } else if c < 0.0 {
                let handle: Arc<dyn PainleveHandle> = match (&painleve.file, painleve.mock) {
                    (Some(f), false) => Arc::new(TabulatedHandle::from_csv(f)?),
                    (None, true) => Arc::new(MockHandle::new(c, s)),
                    (Some(_), true) => {
                        return Err(CliError::Usage("give either --painleve or --painleve-mock, not both".into()))
                    }
                    (None, false) => {
                        return Err(CliError::Usage(
                            "the edge limit for c in (-1,0) needs --painleve FILE or --painleve-mock".into(),
                        ))
                    }
                };
                let mut input = PainleveInput::new(handle, c, s)?;
                let c_const = match painleve.c_const {
                    Some(v) => v,
                    None => normalize_c(&input, NORMALIZE_PROBE)?,
                };
                input = input.with_c_const(c_const);
                let vals =
                    pts.par_iter().map(|z| edge_from_painleve(&input, *z)).collect::<lemnis::Result<Vec<_>>>()?;
                let imag = vals.iter().map(|v| v.imag_residual.abs()).fold(0.0, f64::max);
                summary.insert("C".into(), json!(c_const));
                summary.insert("max_imag_residual".into(), json!(imag));
                limit_profile(pts, vals.iter().map(|v| v.value).collect(), params, ProfileKind::LimitEdge)
            } else {
                return Err(CliError::Unsupported(format!(
                    "edge limit for non-integer c = {c} > 0 has no closed form and no transcendental input"
                )));
            }
        }
    };
    write_profile(out, &profile)?;
    summary.insert("command".into(), json!("density"));
    summary.insert("kind".into(), json!(kind));
    summary.insert("points".into(), json!(profile.values.len()));
    summary.insert("output".into(), json!(out));
    summary.insert("metadata".into(), json!(sidecar(out)));
    Ok(Value::Object(summary))
}

fn hist_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
    out.with_file_name(format!("{stem}_hist.csv"))
}

pub fn sample(p: &Params, seed: u64, bins: usize, radial: bool, out: &Path) -> Result<Value, CliError> {
    if p.tau.is_some() {
        return Err(CliError::Usage("--tau is only used by verify".into()));
    }
    if bins < 2 {
        return Err(CliError::Usage(format!("--bins must be at least 2, got {bins}")));
    }
    let params = p.ensemble(0.5, 0.0, 50, 1)?;
    let run = if radial {
        if params.a != 0.0 {
            return Err(CliError::Usage("--radial needs a = 0".into()));
        }
        sample_radial(params.c, params.n, params.d, seed)?
    } else {
        let h = KernelHandle::for_params(&params)?;
        sample_projection_dpp(&h, seed, default_region(&h))?
    };
    let hist = empirical_histogram(&run, bins)?;
    let spec = DropletSpec::new(params.d, params.a)?;
    let total = run.points.len() as f64;
    let inside = run.points.iter().filter(|z| in_droplet(&spec, **z)).count() as f64;
    let mut extra = Map::new();
    extra.insert("inside_droplet_fraction".into(), json!(inside / total));
    if params.d == 2 {
        // the two lobes of the a ≥ 1 droplet sit in the half-planes Re ζ > 0 and Re ζ < 0
        let right = run.points.iter().filter(|z| z.re > 0.0).count();
        extra.insert("lobe_counts".into(), json!({"re_positive": right, "re_negative": run.points.len() - right}));
    }
    let min_modulus = run.points.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    extra.insert("min_modulus".into(), json!(min_modulus));
    write_sample(out, &run, extra.clone())?;
    let hp = hist_path(out);
    write_profile(&hp, &hist)?;
    let mut summary = extra;
    summary.insert("command".into(), json!("sample"));
    summary.insert("points".into(), json!(run.points.len()));
    summary.insert("acceptance_stats".into(), json!(run.acceptance_stats));
    summary.insert("output".into(), json!(out));
    summary.insert("histogram".into(), json!(hp));
    Ok(Value::Object(summary))
}

pub fn droplet(p: &Params, points: usize, mass_check: bool, out: &Path) -> Result<Value, CliError> {
    let spec = DropletSpec::new(p.d.unwrap_or(1), p.a.unwrap_or(0.5))?;
    let branches = boundary_points(&spec, points)?;
    let files = write_boundary(out, &branches)?;
    let mut summary = Map::new();
    summary.insert("command".into(), json!("droplet"));
    summary.insert("d".into(), json!(spec.d));
    summary.insert("a".into(), json!(spec.a));
    summary.insert("topology".into(), json!(spec.topology()));
    summary.insert("branches".into(), json!(files));
    if mass_check {
        let m = equilibrium_mass(&spec)?;
        summary.insert("equilibrium_mass".into(), json!(m));
        summary.insert("mass_tolerance".into(), json!(MASS_TOL));
        if (m - 1.0).abs() > MASS_TOL {
            println!("{}", Value::Object(summary));
            return Err(CliError::Verification(format!("equilibrium mass {m} differs from 1 by more than {MASS_TOL}")));
        }
    }
    Ok(Value::Object(summary))
}
