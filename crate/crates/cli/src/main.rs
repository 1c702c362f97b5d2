mod commands;
mod config;
mod error;
mod verify;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use config::{DensityKind, FileConfig, Grid, GridArgs, ParamArgs, Params, RescalingArg, Suite};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "lemnis",
    version,
    about = "Kernels, limits, sampling and droplets for lemniscate ensembles with a point charge"
)]
struct Cli {
    /// JSON file whose keys mirror the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a one-point density profile (CSV plus JSON metadata).
    Density {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Which profile to evaluate [default: finite-n].
        #[arg(long, value_enum)]
        kind: Option<DensityKind>,
        /// Map from grid coordinates z to the physical point ζ [default: origin].
        #[arg(long, value_enum)]
        rescaling: Option<RescalingArg>,
        /// Tabulated transcendental: CSV with columns w, re, im.
        #[arg(long)]
        painleve: Option<PathBuf>,
        /// Use the built-in mock transcendental.
        #[arg(long)]
        painleve_mock: bool,
        /// Normalization constant of the transcendental formula.
        #[arg(long = "C", allow_hyphen_values = true)]
        c_const: Option<f64>,
        /// Output CSV; metadata goes next to it with a .json extension [default: density.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the identity and convergence suites and write a JSON report.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        /// Run only these suites (repeatable).
        #[arg(long, value_enum)]
        only: Vec<Suite>,
        /// Threshold override, e.g. --tol cdi=1e-7.
        #[arg(long, value_parser = parse_tol)]
        tol: Vec<(Suite, f64)>,
        /// JSON report path [default: verify_report.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an exact sample; writes points, a histogram and metadata.
    Sample {
        #[command(flatten)]
        params: ParamArgs,
        /// RNG seed [default: 0].
        #[arg(long)]
        seed: Option<u64>,
        /// Histogram bins per side [default: 40].
        #[arg(long)]
        bins: Option<usize>,
        /// Independent-moduli sampler (a = 0 only).
        #[arg(long)]
        radial: bool,
        /// Points CSV; the histogram goes to <stem>_hist.csv [default: sample.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the droplet boundary, one CSV per branch.
    Droplet {
        #[command(flatten)]
        params: ParamArgs,
        /// Points per branch [default: 400].
        #[arg(long)]
        points: Option<usize>,
        /// Check that the equilibrium measure has unit mass.
        #[arg(long)]
        mass_check: bool,
        /// Boundary CSV stem; branches go to <stem>_branch<k>.csv [default: boundary.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_tol(s: &str) -> Result<(Suite, f64), String> {
    use clap::ValueEnum;
    let (name, v) = s.split_once('=').ok_or_else(|| format!("expected SUITE=VALUE, got {s:?}"))?;
    let suite = Suite::from_str(name, true)?;
    let v: f64 = v.parse().map_err(|e| format!("bad tolerance {v:?}: {e}"))?;
    if v.is_nan() || v <= 0.0 {
        return Err(format!("tolerance must be positive, got {v}"));
    }
    Ok((suite, v))
}

fn run(cli: Cli) -> Result<Value, CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Density { params, grid, kind, rescaling, painleve, painleve_mock, c_const, out } => {
            let p = Params::merge(&params, &file);
            let g = Grid::merge(&grid, &file)?;
            let kind = kind.or(file.kind).unwrap_or(DensityKind::FiniteN);
            let rescaling = rescaling.or(file.rescaling).map(Into::into);
            let pv = commands::PainleveOpts {
                file: painleve.or(file.painleve.clone()),
                mock: painleve_mock || file.painleve_mock.unwrap_or(false),
                c_const: c_const.or(file.c_const),
            };
            let out = out.or(file.out.clone()).unwrap_or_else(|| "density.csv".into());
            commands::density(&p, &g, kind, rescaling, &pv, &out)
        }
        Command::Verify { params, only, tol, out } => {
            let p = Params::merge(&params, &file);
            let only = if only.is_empty() { file.only.clone().unwrap_or_default() } else { only };
            let mut tols: BTreeMap<Suite, f64> = file.tol.clone().unwrap_or_default();
            tols.extend(tol);
            let report = verify::run(&p, &only, &tols)?;
            let out = out.or(file.out.clone()).unwrap_or_else(|| "verify_report.json".into());
            lemnis::export::write_json(&out, &report)?;
            for r in &report.results {
                let res = r.residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
                let thr = r.threshold.map(|v| format!("{v:.1e}")).unwrap_or_else(|| "-".into());
                eprintln!(
                    "{:<17} {:<11} residual {res:<10} threshold {thr:<8} {}",
                    r.suite,
                    format!("{:?}", r.status).to_lowercase(),
                    r.check
                );
            }
            if let Some(e) = report.exit_error() {
                println!("{}", serde_json::json!({"command": "verify", "status": report.status, "report": out}));
                return Err(e);
            }
            Ok(serde_json::json!({"command": "verify", "status": report.status, "report": out}))
        }
        Command::Sample { params, seed, bins, radial, out } => {
            let p = Params::merge(&params, &file);
            let seed = seed.or(file.seed).unwrap_or(0);
            let bins = bins.or(file.bins).unwrap_or(40);
            let radial = radial || file.radial.unwrap_or(false);
            let out = out.or(file.out.clone()).unwrap_or_else(|| "sample.csv".into());
            commands::sample(&p, seed, bins, radial, &out)
        }
        Command::Droplet { params, points, mass_check, out } => {
            let p = Params::merge(&params, &file);
            let points = points.or(file.points).unwrap_or(400);
            let mass_check = mass_check || file.mass_check.unwrap_or(false);
            let out = out.or(file.out.clone()).unwrap_or_else(|| "boundary.csv".into());
            commands::droplet(&p, points, mass_check, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
