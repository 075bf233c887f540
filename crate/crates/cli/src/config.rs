//! `ExperimentConfig`: TOML with top-level keys and one level of sections.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dnls_core::decay::RateModel;
use dnls_core::solver::{boundary_check, BoundaryCheck, InitialData, SpectralGrid};
use dnls_core::CubicNonlinearity;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub verdict: VerdictSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("pipeline-out")
}

/// Either a coefficient file or inline `key = "re,im"` entries (inline wins).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(flatten)]
    pub coefficients: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// `gaussian`, `sech` or `file`.
    pub family: String,
    /// σ for `gaussian`, w for `sech`.
    pub width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub eps: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            family: "gaussian".into(),
            width: 2.0,
            file: None,
            eps: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub length: f64,
    pub n: usize,
    /// Fixed step, ignored when `auto_dt` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Let the stability probe pick the step.
    pub auto_dt: bool,
    pub t_max: f64,
    /// Number of log-spaced diagnostic times on `[1, t_max]`.
    pub diag_count: usize,
    /// Number of log-spaced `α` snapshots for the envelope heat map.
    pub snapshot_count: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            length: 1024.0,
            n: 4096,
            dt: Some(0.05),
            auto_dt: false,
            t_max: 100.0,
            diag_count: 40,
            snapshot_count: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    /// The seed `A(0)` keeps `|ξ| <= xi_max`.
    pub xi_max: f64,
    /// Extension window in `τ` for the profile exponent.
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_count: usize,
    pub model: RateModel,
    /// PDE/profile gaps are compared for `t >= compare_from`.
    pub compare_from: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            xi_max: 8.0,
            tau_min: 1e2,
            tau_max: 1e6,
            tau_count: 41,
            model: RateModel::LogPower,
            compare_from: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictSection {
    /// Largest allowed relative PDE/profile gap.
    pub gap_tol: f64,
    /// Allowed deviation of the profile exponent.
    pub exponent_tol: f64,
}

impl Default for VerdictSection {
    fn default() -> Self {
        Self {
            gap_tol: 0.10,
            exponent_tol: 0.02,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    /// Reads `path`, resolving relative paths (inputs and `out`) against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [cfg.nonlinearity.file.as_mut(), cfg.initial.file.as_mut(), Some(&mut cfg.out)]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn nonlinearity(&self) -> Result<CubicNonlinearity, CliError> {
        let mut nl = match &self.nonlinearity.file {
            Some(p) => CubicNonlinearity::parse_coefficients(&read_text(p)?)?,
            None => CubicNonlinearity::zero(),
        };
        for (key, value) in &self.nonlinearity.coefficients {
            let v = dnls_core::nonlinearity::parse_complex(value)
                .ok_or_else(|| CliError::Invalid(format!("nonlinearity.{key}: `{value}` is not `re,im`")))?;
            *nl.coefficient_mut(key)? = v;
        }
        Ok(nl)
    }

    pub fn initial_data(&self) -> Result<InitialData, CliError> {
        initial_data(&self.initial.family, self.initial.width, self.initial.file.as_deref())
    }

    /// Cross-checks done before any computation.
    pub fn validate(&self) -> Result<BoundaryCheck, CliError> {
        let bad = |m: String| Err(CliError::Invalid(m));
        self.nonlinearity()?;
        let psi = self.initial_data()?;
        let s = &self.solver;
        if !(self.initial.eps > 0.0) {
            return bad(format!("initial.eps must be positive, got {}", self.initial.eps));
        }
        if !(0.05..=0.5).contains(&self.initial.eps) {
            log::warn!("eps = {} is outside the usual range [0.05, 0.5]", self.initial.eps);
        }
        if !(s.t_max > std::f64::consts::E) {
            return bad(format!("solver.t_max must exceed e (the seeding time), got {}", s.t_max));
        }
        if s.diag_count < 2 {
            return bad("solver.diag_count must be at least 2".into());
        }
        let p = &self.profile;
        if !(p.compare_from >= std::f64::consts::E && p.compare_from < s.t_max) {
            return bad(format!(
                "profile.compare_from = {} must lie in [e, t_max = {})",
                p.compare_from, s.t_max
            ));
        }
        if !(p.tau_min >= 1.0 && p.tau_max > p.tau_min && p.tau_count >= 8) {
            return bad("profile window needs 1 <= tau_min < tau_max and tau_count >= 8".into());
        }
        if !(p.xi_max > 0.0) {
            return bad("profile.xi_max must be positive".into());
        }
        if !(self.verdict.gap_tol > 0.0 && self.verdict.exponent_tol > 0.0) {
            return bad("verdict tolerances must be positive".into());
        }
        let grid = SpectralGrid::new(s.length, s.n)?;
        let check = boundary_check(&psi, &grid, s.t_max);
        if !check.ok() {
            return bad(check.to_string());
        }
        Ok(check)
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `gaussian`, `sech`, or a sample file (`file` with `path`, or a bare path).
pub fn initial_data(family: &str, width: f64, path: Option<&Path>) -> Result<InitialData, CliError> {
    match family {
        "gaussian" => Ok(InitialData::Gaussian { sigma: width }),
        "sech" => Ok(InitialData::Sech { width }),
        "file" => {
            let p = path.ok_or_else(|| CliError::Invalid("family `file` needs a path".into()))?;
            Ok(InitialData::parse_samples(&read_text(p)?)?)
        }
        other => Ok(InitialData::parse_samples(&read_text(Path::new(other))?)?),
    }
}
