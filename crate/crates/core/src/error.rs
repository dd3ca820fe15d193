use std::fmt;

/// One problem found while validating a run configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConfigIssue {
    /// Location inside the config document, e.g. `pumps[1].schedule[0]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary segment conflict: {0}")]
    Conflict(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("incompatible boundary trace: net normal flux {flux:e}")]
    Compatibility { flux: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("requested {requested} modes but the divergence-free subspace has dimension {available}")]
    Capacity { requested: usize, available: usize },

    #[error("eigensolver did not converge: worst relative residual {residual:e}")]
    EigenNonConvergence { residual: f64 },

    #[error("time {t} outside schedule range [0, {end}]")]
    Range { t: f64, end: f64 },

    #[error("nonlinear step at t={t} failed: residual {residual:e} after {iterations} iterations (try a smaller dt)")]
    Step { t: f64, residual: f64, iterations: usize },

    #[error("invalid configuration ({} issue(s))", .0.len())]
    Config(Vec<ConfigIssue>),

    #[error("basis file does not match this mesh (expected {expected}, found {found})")]
    Fingerprint { expected: String, found: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Config problems are the caller's fault; everything else is a numerical or I/O failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
