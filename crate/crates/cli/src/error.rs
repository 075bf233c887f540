use std::io;
use std::path::PathBuf;

use dnls_core::decay::DecayError;
use dnls_core::nonlinearity::NonlinearityError;
use dnls_core::profile::ProfileError;
use dnls_core::solver::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verdict failed: {0}")]
    Verdict(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            s @ Self::Stage { .. } => s,
            other => Self::Stage { stage, source: Box::new(other) },
        }
    }

    /// 0 success, 1 verdict failure, 2 invalid input, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Verdict(_) => 1,
            Self::Invalid(_) | Self::Io { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Stage { source, .. } => source.exit_code(),
        }
    }
}

impl From<NonlinearityError> for CliError {
    fn from(e: NonlinearityError) -> Self {
        Self::Invalid(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFinite { .. } | SolverError::ProbeFailed(_) => Self::Numerical(e.to_string()),
            _ => Self::Invalid(e.to_string()),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Integration { .. } | ProfileError::NonPositiveRadicand { .. } | ProfileError::QBelowOne { .. } => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Invalid(e.to_string()),
        }
    }
}

impl From<DecayError> for CliError {
    fn from(e: DecayError) -> Self {
        match e {
            DecayError::UpperBoundViolated { .. } | DecayError::LowerBoundViolated { .. } => Self::Verdict(e.to_string()),
            DecayError::Quadrature(_) | DecayError::DivergentTail => Self::Numerical(e.to_string()),
            _ => Self::Invalid(e.to_string()),
        }
    }
}
