//! Gnuplot scripts that read the pipeline's CSV files. They are written, not run.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::pipeline::ComparisonReport;

const PREAMBLE: &str = "set datafile separator ','\nset datafile missing 'NaN'\nset terminal pngcairo size 900,600\nset key autotitle columnhead\n";

/// Writes `decay_overlay.gp`, `nu_parabola.gp` and `alpha_envelope.gp` into
/// `dir`, which must already hold the CSVs they reference.
pub fn emit_plots(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    for csv in ["report.csv", "nu.csv", "alpha_envelope.csv"] {
        if !dir.join(csv).is_file() {
            return Err(CliError::Invalid(format!("missing {}", dir.join(csv).display())));
        }
    }
    let s = &report.settings;
    let annotation = match (s.c0, s.xi0) {
        (Some(c0), Some(xi0)) => format!(
            "set label 1 sprintf('c0 = %g, xi0 = %g', {c0:e}, {xi0:e}) at graph 0.05, graph 0.9\nset arrow 1 from {xi0:e}, graph 0 to {xi0:e}, graph 1 nohead dashtype 2\n"
        ),
        _ => String::new(),
    };
    let scripts = [
        (
            "decay_overlay.gp",
            format!(
                "{PREAMBLE}set output 'decay_overlay.png'\nset logscale xy\nset xlabel 'log t'\nset ylabel '||u||_2'\nset title '{class}: profile exponent {p:.4}'\nplot 'report.csv' using 2:3 with points pointtype 7 title 'PDE', \\\n     'report.csv' using 2:4 with lines title 'profile (alpha(e) seed)', \\\n     'report.csv' using 2:6 with lines dashtype 2 title 'profile (eps psi-hat seed)'\n",
                class = s.class,
                p = report.profile_fit.exponent
            ),
        ),
        (
            "nu_parabola.gp",
            format!(
                "{PREAMBLE}set output 'nu_parabola.png'\nset xlabel 'xi'\nset ylabel 'Im nu(xi)'\nset title '{class}'\n{annotation}plot 'nu.csv' using 1:3 with lines title 'Im nu', 0 with lines dashtype 3 notitle\n",
                class = s.class
            ),
        ),
        (
            "alpha_envelope.gp",
            format!(
                "{PREAMBLE}set output 'alpha_envelope.png'\nset view map\nset logscale y\nset xlabel 'xi'\nset ylabel 't'\nset cblabel '|alpha|'\nsplot 'alpha_envelope.csv' using 2:1:3 with points pointtype 5 pointsize 0.6 palette notitle\n"
            ),
        ),
    ];
    let mut written = Vec::new();
    for (name, body) in scripts {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
