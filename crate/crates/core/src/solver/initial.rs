use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SolverError, SpectralGrid};

/// Relative spectral level below which a mode counts as empty.
const SPECTRAL_FLOOR: f64 = 1e-8;

/// Shape `ψ` of the initial datum `u(0) = εψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialData {
    /// `e^{−x²/(2σ²)}`
    Gaussian { sigma: f64 },
    /// `sech(x/w)`
    Sech { width: f64 },
    /// Samples `(x, ψ)`, linearly interpolated and zero outside.
    Samples { x: Vec<f64>, values: Vec<Complex64> },
}

impl InitialData {
    pub fn samples(x: Vec<f64>, values: Vec<Complex64>) -> Result<Self, SolverError> {
        if x.len() != values.len() || x.len() < 2 || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SolverError::BadInitialData(
                "need at least two samples with strictly increasing x".into(),
            ));
        }
        Ok(Self::Samples { x, values })
    }

    /// Parses `x,re,im` rows (header lines and `#` comments are skipped).
    pub fn parse_samples(text: &str) -> Result<Self, SolverError> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let nums: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            match nums {
                Some(v) if v.len() == 3 => {
                    xs.push(v[0]);
                    vs.push(Complex64::new(v[1], v[2]));
                }
                None if i == 0 => continue,
                _ => {
                    return Err(SolverError::BadInitialData(format!(
                        "line {}: expected `x,re,im`",
                        i + 1
                    )))
                }
            }
        }
        Self::samples(xs, vs)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Self::Gaussian { sigma } => Complex64::new((-x * x / (2.0 * sigma * sigma)).exp(), 0.0),
            Self::Sech { width } => Complex64::new(1.0 / (x / width).cosh(), 0.0),
            Self::Samples { x: xs, values } => {
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    return Complex64::new(0.0, 0.0);
                }
                let k = xs.partition_point(|&p| p <= x).clamp(1, n - 1);
                let f = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                values[k - 1] * (1.0 - f) + values[k] * f
            }
        }
    }

    /// Unitary Fourier transform `(2π)^{−1/2} ∫ e^{−ixξ} ψ dx`, when known in
    /// closed form.
    pub fn hat(&self, xi: f64) -> Option<Complex64> {
        match self {
            Self::Gaussian { sigma } => Some(Complex64::new(sigma * (-0.5 * sigma * sigma * xi * xi).exp(), 0.0)),
            Self::Sech { width } => Some(Complex64::new(
                width * (PI / 2.0).sqrt() / (0.5 * PI * width * xi).cosh(),
                0.0,
            )),
            Self::Samples { .. } => None,
        }
    }

    /// Characteristic spatial width of the packet.
    pub fn width(&self) -> f64 {
        match self {
            Self::Gaussian { sigma } => 2.0 * sigma,
            Self::Sech { width } => 2.0 * width,
            Self::Samples { x, values } => {
                let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let live: Vec<f64> = x
                    .iter()
                    .zip(values)
                    .filter(|(_, v)| v.norm() > SPECTRAL_FLOOR * sup)
                    .map(|(x, _)| *x)
                    .collect();
                match (live.first(), live.last()) {
                    (Some(a), Some(b)) => b - a,
                    _ => 0.0,
                }
            }
        }
    }

    /// Frequency beyond which `|ψ̂|` stays below `1e-8` of its peak. For
    /// sampled data it is measured on `grid`.
    pub fn xi_max(&self, grid: &SpectralGrid) -> f64 {
        let ln_floor = -SPECTRAL_FLOOR.ln();
        match self {
            Self::Gaussian { sigma } => (2.0 * ln_floor).sqrt() / sigma,
            // sech(y) <= 2e^{−|y|}
            Self::Sech { width } => 2.0 * (ln_floor + 2f64.ln()) / (PI * width),
            Self::Samples { .. } => {
                let mut hat: Vec<Complex64> = grid.x.iter().map(|&x| self.eval(x)).collect();
                grid.fft(&mut hat);
                let peak = hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
                grid.xi
                    .iter()
                    .zip(&hat)
                    .filter(|(_, v)| v.norm() > SPECTRAL_FLOOR * peak)
                    .map(|(x, _)| x.abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Result of the domain-size check `L >= 2 ξ_max t_max + 10 · width` and of
/// the dealiased grid reaching `ξ_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub xi_max: f64,
    pub packet_width: f64,
    pub t_max: f64,
    pub length: f64,
    pub required_length: f64,
    pub xi_cutoff: f64,
    pub length_ok: bool,
    pub resolved: bool,
}

impl BoundaryCheck {
    pub fn ok(&self) -> bool {
        self.length_ok && self.resolved
    }
}

impl fmt::Display for BoundaryCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "boundary check: L = {} (need >= {:.6}), dealiased cutoff {:.6} (need >= ξ_max = {:.6}): {}",
            self.length,
            self.required_length,
            self.xi_cutoff,
            self.xi_max,
            if self.ok() { "ok" } else { "FAILED" }
        )
    }
}

pub fn boundary_check(psi: &InitialData, grid: &SpectralGrid, t_max: f64) -> BoundaryCheck {
    let xi_max = psi.xi_max(grid);
    let packet_width = psi.width();
    let required_length = 2.0 * xi_max * t_max + 10.0 * packet_width;
    let xi_cutoff = grid.xi_cutoff();
    BoundaryCheck {
        xi_max,
        packet_width,
        t_max,
        length: grid.length,
        required_length,
        xi_cutoff,
        length_ok: grid.length >= required_length,
        resolved: xi_cutoff >= xi_max,
    }
}
