use std::fs;
use std::path::Path;

use dnls_core::profile::{ProfileField, TimeCoord};
use dnls_core::solver::{AlphaField, DiagnosticsRecord};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::CliError;
use crate::table::Table;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize to JSON");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub const DIAGNOSTIC_COLUMNS: [&str; 6] = ["t", "l2", "h3", "j_h2", "mass_flux", "alpha_env"];

pub fn diagnostics_table(records: &[DiagnosticsRecord]) -> Table {
    let mut t = Table::new(&DIAGNOSTIC_COLUMNS);
    for r in records {
        t.push(vec![r.t, r.l2, r.h3, r.j_h2, r.mass_flux, r.alpha_env]);
    }
    t
}

pub fn alpha_table(alpha: &AlphaField) -> Table {
    let mut t = Table::new(&["xi", "re", "im"]);
    for (x, a) in alpha.xi.iter().zip(&alpha.alpha) {
        t.push(vec![*x, a.re, a.im]);
    }
    t
}

/// `(t, xi, abs_alpha)` rows for `|ξ| <= xi_max`, thinned to at most
/// `max_points` frequencies per snapshot.
pub fn envelope_table(snapshots: &[AlphaField], xi_max: f64, max_points: usize) -> Table {
    let mut t = Table::new(&["t", "xi", "abs_alpha"]);
    for snap in snapshots {
        let idx: Vec<usize> = (0..snap.xi.len()).filter(|&k| snap.xi[k].abs() <= xi_max).collect();
        let stride = idx.len().div_ceil(max_points.max(1)).max(1);
        for &k in idx.iter().step_by(stride) {
            t.push(vec![snap.t, snap.xi[k], snap.alpha[k].norm()]);
        }
    }
    t
}

/// Reads `xi,re,im` columns into a profile, keeping `|ξ| <= xi_max`.
pub fn profile_from_table(table: &Table, source: &str, xi_max: f64, time: TimeCoord) -> Result<ProfileField, CliError> {
    let xi = table.require("xi", source)?;
    let re = table.require("re", source)?;
    let im = table.require("im", source)?;
    let (grid, values): (Vec<f64>, Vec<Complex64>) = xi
        .iter()
        .zip(re.iter().zip(&im))
        .filter(|(x, _)| x.abs() <= xi_max)
        .map(|(x, (r, i))| (*x, Complex64::new(*r, *i)))
        .unzip();
    Ok(ProfileField::new(grid, values, time)?)
}
