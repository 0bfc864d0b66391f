use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One violated invariant, addressed by its dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every invariant violation found in one validation pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationErrors(pub Vec<FieldError>);

impl ValidationErrors {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FieldError> {
        self.0.iter()
    }

    /// True if some error is reported at exactly `path`.
    pub fn has_path(&self, path: &str) -> bool {
        self.0.iter().any(|e| e.path == path)
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario ({n} problem(s)):\n{errs}", n = .0.len(), errs = .0)]
    Invalid(ValidationErrors),

    #[error(
        "governor ratio {target} unattainable with this fleet: achieved {achieved}, residual {residual}"
    )]
    GovernorRatio {
        target: f64,
        achieved: f64,
        residual: f64,
    },

    #[error("power base must be positive, got {0}")]
    NonPositiveBase(f64),

    #[error("simulation state became non-finite at t = {t} s")]
    NonFinite { t: f64 },

    #[error("initial state is not an equilibrium (derivative norm {residual:e})")]
    Equilibrium { residual: f64 },

    #[error("ROCOF window too short: {0}")]
    RocofWindow(String),

    #[error("trace does not cover {what}")]
    TraceCoverage { what: String },

    #[error("bad input: {0}")]
    Input(String),

    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error("unknown tactic `{0}`")]
    UnknownTactic(String),

    #[error("tactic `{name}`: {source}")]
    Tactic {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("override `{path}`: {message}")]
    Override { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
