//! Versioned CSV and JSON artifacts. Numbers are written with 17
//! significant digits so that repeated runs compare byte for byte.

use std::fs;
use std::path::Path;

use fracfilm_core::diagnostics::StepDiagnostics;
use fracfilm_core::SpectralField;
use serde::Serialize;

use crate::CliError;

pub const FORMAT_TAG: &str = "fracfilm-v1";
pub const DIAGNOSTICS_COLUMNS: [&str; 8] = [
    "t",
    "mass",
    "energy",
    "entropy",
    "energy_dissip",
    "entropy_dissip",
    "min_value",
    "flux_l1",
];

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(columns: &[String]) -> String {
    format!("# {FORMAT_TAG}\n{}\n", columns.join(","))
}

pub fn diagnostics_csv(rows: &[StepDiagnostics], failure: Option<&str>) -> String {
    let cols: Vec<String> = DIAGNOSTICS_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut out = header(&cols);
    for r in rows {
        let vals = [
            r.t,
            r.mass,
            r.energy,
            r.entropy,
            r.energy_dissip,
            r.entropy_dissip,
            r.min_value,
            r.flux_l1,
        ];
        out.push_str(&vals.map(fmt_num).join(","));
        out.push('\n');
    }
    push_failure(&mut out, failure);
    out
}

pub fn snapshots_csv(times: &[f64], states: &[SpectralField], failure: Option<&str>) -> String {
    let n = states.first().map_or(0, SpectralField::n_modes);
    let cols: Vec<String> = std::iter::once("t".to_string())
        .chain((0..n).map(|k| format!("c{k}")))
        .collect();
    let mut out = header(&cols);
    for (t, u) in times.iter().zip(states) {
        out.push_str(&fmt_num(*t));
        for c in u.coeffs() {
            out.push(',');
            out.push_str(&fmt_num(*c));
        }
        out.push('\n');
    }
    push_failure(&mut out, failure);
    out
}

/// Rows of `(index, axis value, distance to previous, observed order)`.
pub fn convergence_csv(axis: &str, rows: &[(usize, f64, Option<f64>, Option<f64>)], failure: Option<&str>) -> String {
    let cols = ["index", axis, "distance_to_previous", "observed_order"].map(String::from);
    let mut out = header(&cols);
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for (i, value, dist, order) in rows {
        out.push_str(&format!("{i},{},{},{}\n", fmt_num(*value), opt(*dist), opt(*order)));
    }
    push_failure(&mut out, failure);
    out
}

pub fn check_table_csv(rows: &[crate::verify::CheckRow]) -> String {
    let cols = ["check", "value", "tolerance", "passed"].map(String::from);
    let mut out = header(&cols);
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.name,
            fmt_num(r.value),
            fmt_num(r.tolerance),
            r.passed
        ));
    }
    out
}

fn push_failure(out: &mut String, failure: Option<&str>) {
    if let Some(msg) = failure {
        out.push_str("# FAILED: ");
        out.push_str(&msg.replace('\n', " "));
        out.push('\n');
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let io = |path: &Path, source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io(&path, e))
}
