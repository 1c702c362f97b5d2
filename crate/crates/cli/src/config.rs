//! Command-line flags and the JSON config file. Every flag has a config key
//! of the same name; flags win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use lemnis::{Complex64, EnsembleParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Charge location / droplet parameter a ≥ 0.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Point-charge strength c > −1.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Number of particles N.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Fold order d ≥ 1.
    #[arg(long)]
    pub d: Option<usize>,
    /// Critical edge offset S, a = 1 + S/(2√N).
    #[arg(long = "S", allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Elliptic non-Hermiticity τ ∈ [0, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    /// Grid lower bound in Re z [default: -3]
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    /// Grid upper bound in Re z [default: 3]
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    /// Grid lower bound in Im z [default: -3]
    #[arg(long, allow_hyphen_values = true)]
    pub y_min: Option<f64>,
    /// Grid upper bound in Im z [default: 3]
    #[arg(long, allow_hyphen_values = true)]
    pub y_max: Option<f64>,
    /// Grid points along Re z [default: 60]
    #[arg(long)]
    pub nx: Option<usize>,
    /// Grid points along Im z [default: 60]
    #[arg(long)]
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    /// Kernel diagonal at the configured N.
    FiniteN,
    /// Bulk limit at the charge.
    BulkLimit,
    /// Critical edge limit.
    EdgeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescalingArg {
    None,
    Origin,
    AboutCharge,
}

impl From<RescalingArg> for lemnis::Rescaling {
    fn from(r: RescalingArg) -> Self {
        match r {
            RescalingArg::None => lemnis::Rescaling::None,
            RescalingArg::Origin => lemnis::Rescaling::Origin,
            RescalingArg::AboutCharge => lemnis::Rescaling::AboutCharge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Elliptic,
    Cdi,
    Insertion,
    Multifold,
    Specfun,
    Edge,
    BulkConvergence,
    EdgeConvergence,
    Droplet,
    Painleve,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Elliptic => "elliptic",
            Suite::Cdi => "cdi",
            Suite::Insertion => "insertion",
            Suite::Multifold => "multifold",
            Suite::Specfun => "specfun",
            Suite::Edge => "edge",
            Suite::BulkConvergence => "bulk-convergence",
            Suite::EdgeConvergence => "edge-convergence",
            Suite::Droplet => "droplet",
            Suite::Painleve => "painleve",
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub a: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    pub tau: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kind: Option<DensityKind>,
    pub rescaling: Option<RescalingArg>,
    pub only: Option<Vec<Suite>>,
    pub tol: Option<BTreeMap<Suite, f64>>,
    pub bins: Option<usize>,
    pub radial: Option<bool>,
    pub points: Option<usize>,
    pub mass_check: Option<bool>,
    pub painleve: Option<PathBuf>,
    pub painleve_mock: Option<bool>,
    #[serde(rename = "C")]
    pub c_const: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Ensemble parameters after merging flags over the file; unset values stay `None`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Params {
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub s: Option<f64>,
    pub tau: Option<f64>,
}

impl Params {
    pub fn merge(flags: &ParamArgs, file: &FileConfig) -> Self {
        Self {
            a: flags.a.or(file.a),
            c: flags.c.or(file.c),
            n: flags.n.or(file.n),
            d: flags.d.or(file.d),
            s: flags.s.or(file.s),
            tau: flags.tau.or(file.tau),
        }
    }

    /// Point-charge parameters with the given defaults; S, when set, fixes a.
    pub fn ensemble(&self, a: f64, c: f64, n: usize, d: usize) -> Result<EnsembleParams, CliError> {
        let n = self.n.unwrap_or(n);
        let c = self.c.unwrap_or(c);
        let d = self.d.unwrap_or(d);
        let p = match self.s {
            Some(s) => {
                if self.a.is_some() {
                    return Err(CliError::Usage("give either --a or --S, not both".into()));
                }
                EnsembleParams::critical(c, n, s)
            }
            None => EnsembleParams::new(self.a.unwrap_or(a), c, n),
        };
        Ok(p.and_then(|p| p.with_d(d))?)
    }
}

/// Rectangular evaluation grid, row-major with x varying fastest.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn merge(flags: &GridArgs, file: &FileConfig) -> Result<Self, CliError> {
        let g = Self {
            x_min: flags.x_min.or(file.x_min).unwrap_or(-3.0),
            x_max: flags.x_max.or(file.x_max).unwrap_or(3.0),
            y_min: flags.y_min.or(file.y_min).unwrap_or(-3.0),
            y_max: flags.y_max.or(file.y_max).unwrap_or(3.0),
            nx: flags.nx.or(file.nx).unwrap_or(60),
            ny: flags.ny.or(file.ny).unwrap_or(60),
        };
        if g.nx < 2 || g.ny < 2 {
            return Err(CliError::Usage(format!("grid counts must be at least 2, got nx={} ny={}", g.nx, g.ny)));
        }
        if !(g.x_min < g.x_max && g.y_min < g.y_max) {
            return Err(CliError::Usage("grid bounds need x_min < x_max and y_min < y_max".into()));
        }
        Ok(g)
    }

    pub fn points(&self) -> Vec<Complex64> {
        let step = |lo: f64, hi: f64, n: usize, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| {
                    Complex64::new(step(self.x_min, self.x_max, self.nx, i), step(self.y_min, self.y_max, self.ny, j))
                })
            })
            .collect()
    }
}
