//! Plot data as CSV.
//!
//! * `heatmap`: `heatmap_NNN.csv` per field, header `x1,..,xn,value`, one row
//!   per node at its torus position, numbers in `{:.17e}`.
//! * `timeseries`: `timeseries.csv`, header `t,p0,p1,..`, one row per field,
//!   values interpolated at the probe points.
//! * `levelset`: `levelset_NNN.csv` per field, header `t,x1,..,xn`, one row per
//!   node with value `<= level + tol`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{interpolate_raw, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExportKind {
    Heatmap,
    Timeseries,
    Levelset,
}

pub fn heatmap(fields: &[ScalarField]) -> Vec<(String, String)> {
    fields
        .iter()
        .enumerate()
        .map(|(i, f)| (format!("heatmap_{i:03}.csv"), f.to_csv()))
        .collect()
}

pub fn timeseries(fields: &[ScalarField], points: &[Vec<f64>]) -> Result<String> {
    for p in points {
        if fields.iter().any(|f| f.grid.n != p.len()) {
            return Err(Error::DimensionMismatch {
                expected: fields[0].grid.n,
                got: p.len(),
            });
        }
    }
    let mut out = String::from("t");
    for i in 0..points.len() {
        out.push_str(&format!(",p{i}"));
    }
    out.push('\n');
    for f in fields {
        out.push_str(&format!("{:.17e}", f.time));
        for p in points {
            out.push_str(&format!(",{:.17e}", interpolate_raw(f, p)));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn levelset(fields: &[ScalarField], level: f64, tol: f64) -> Vec<(String, String)> {
    fields
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut out = String::from("t");
            for a in 1..=f.grid.n {
                out.push_str(&format!(",x{a}"));
            }
            out.push('\n');
            for j in 0..f.grid.len() {
                if f.values[j] <= level + tol {
                    out.push_str(&format!("{:.17e}", f.time));
                    for x in f.node_point(j) {
                        out.push_str(&format!(",{x:.17e}"));
                    }
                    out.push('\n');
                }
            }
            (format!("levelset_{i:03}.csv"), out)
        })
        .collect()
}

/// Writes the requested export and returns the written paths.
pub fn export_plot_data(
    fields: &[ScalarField],
    kind: ExportKind,
    out: &Path,
    points: &[Vec<f64>],
    level: f64,
    tol: f64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let files = match kind {
        ExportKind::Heatmap => heatmap(fields),
        ExportKind::Timeseries => vec![("timeseries.csv".to_string(), timeseries(fields, points)?)],
        ExportKind::Levelset => levelset(fields, level, tol),
    };
    let mut written = Vec::new();
    for (name, text) in files {
        let p = out.join(name);
        std::fs::write(&p, text)?;
        written.push(p);
    }
    Ok(written)
}
