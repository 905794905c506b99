//! Command line, configuration, persistence and plot export.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod export;
pub mod manifest;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periodic::{PeriodicSolution, PeriodicityReport};
use crate::periods::{PeriodCertificate, RationalHyperplaneSet};

pub use commands::{run, run_from_args, Cli};
use manifest::{read_fields, ManifestBuilder};

/// Exit status for an error: 2 for usage, configuration and input problems,
/// 1 for numerical or invariant failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::GridMismatch(_)
        | Error::DimensionMismatch { .. }
        | Error::Format(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Metadata stored next to the fields of a periodic solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMeta {
    #[serde(rename = "T")]
    pub period: f64,
    pub certificate: PeriodCertificate,
    pub convergence: Vec<f64>,
    pub converged: bool,
    pub c: f64,
    pub omega: Vec<f64>,
    pub step: f64,
    pub big_value: f64,
    pub comoving_defect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<PeriodicityReport>,
}

/// Writes `sub/periodic.json` and the fields of `sol` under `dir`.
pub fn save_periodic(m: &mut ManifestBuilder, dir: &Path, sub: &str, sol: &PeriodicSolution) -> Result<()> {
    let meta = PeriodicMeta {
        period: sol.period,
        certificate: sol.certificate.clone(),
        convergence: sol.convergence.clone(),
        converged: sol.converged,
        c: sol.c,
        omega: sol.omega.clone(),
        step: sol.step,
        big_value: sol.big_value,
        comoving_defect: sol.comoving_defect,
        verification: sol.verification.clone(),
    };
    let name = if sub.is_empty() {
        "periodic.json".to_string()
    } else {
        format!("{sub}/periodic.json")
    };
    m.write_json(dir, &name, &meta)?;
    m.write_fields(dir, sub, &sol.fields_over_period)
}

pub fn load_periodic(dir: &Path) -> Result<PeriodicSolution> {
    let path = dir.join("periodic.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let meta: PeriodicMeta = serde_json::from_str(&text)?;
    let fields = read_fields(dir)?;
    let n = meta.omega.len();
    if fields.len() < 2 || fields.iter().any(|f| f.grid != fields[0].grid || f.grid.n != n) {
        return Err(Error::Format(format!(
            "{}: expected at least two fields on one grid of dimension {n}",
            dir.display()
        )));
    }
    Ok(PeriodicSolution {
        period: meta.period,
        s: RationalHyperplaneSet::new(&meta.certificate.k[..n])?,
        certificate: meta.certificate,
        fields_over_period: fields,
        convergence: meta.convergence,
        converged: meta.converged,
        c: meta.c,
        omega: meta.omega,
        step: meta.step,
        big_value: meta.big_value,
        comoving_defect: meta.comoving_defect,
        verification: meta.verification,
    })
}
