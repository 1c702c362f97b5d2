//! CSV and JSON output. Numbers are written with 17 significant digits so
//! every f64 round-trips exactly; files are written to a temporary sibling
//! and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DensityProfile, ProfileKind, Rescaling};
use crate::params::EnsembleParams;
use crate::sampler::{AcceptanceStats, Region, SampleRun};

/// Shortest scientific form with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// CSV bytes from a header and rows of numbers.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt17(*x)))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Sidecar path: the data path with its extension replaced by `json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub params: EnsembleParams,
    pub kind: ProfileKind,
    pub rescaling: Rescaling,
    #[serde(rename = "N_terms", skip_serializing_if = "Option::is_none")]
    pub n_terms: Option<usize>,
}

/// Profile CSV (re, im, value) plus its metadata sidecar.
pub fn write_profile(path: &Path, profile: &DensityProfile) -> Result<()> {
    let rows = profile.grid.iter().zip(&profile.values).map(|(z, v)| vec![z.re, z.im, *v]);
    write_atomic(path, &csv_bytes(&["re", "im", "value"], rows)?)?;
    let meta = ProfileMeta {
        params: profile.params.clone(),
        kind: profile.kind,
        rescaling: profile.rescaling,
        n_terms: profile.n_terms,
    };
    write_json(&sidecar(path), &meta)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub params: EnsembleParams,
    pub seed: u64,
    pub acceptance_stats: AcceptanceStats,
    pub region: Region,
    /// Extra statistics supplied by the caller.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Sample CSV (re, im) plus its metadata sidecar.
pub fn write_sample(path: &Path, run: &SampleRun, extra: serde_json::Map<String, serde_json::Value>) -> Result<()> {
    write_atomic(path, &points_csv(&run.points)?)?;
    let meta = SampleMeta {
        params: run.params.clone(),
        seed: run.seed,
        acceptance_stats: run.acceptance_stats,
        region: run.region,
        extra,
    };
    write_json(&sidecar(path), &meta)
}

pub fn points_csv(points: &[Complex64]) -> Result<Vec<u8>> {
    csv_bytes(&["re", "im"], points.iter().map(|z| vec![z.re, z.im]))
}

/// One CSV per boundary branch, `<stem>_branch<k>.csv` next to `path`.
pub fn write_boundary(path: &Path, branches: &[Vec<Complex64>]) -> Result<Vec<PathBuf>> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidParam(format!("output path {} has no file name", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::with_capacity(branches.len());
    for (k, b) in branches.iter().enumerate() {
        let p = dir.join(format!("{stem}_branch{k}.csv"));
        write_atomic(&p, &points_csv(b)?)?;
        out.push(p);
    }
    Ok(out)
}

/// Reads a two- or three-column numeric CSV with a header row.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParam(format!("bad number {f:?} in {}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
