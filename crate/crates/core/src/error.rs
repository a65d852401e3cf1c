use std::path::PathBuf;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Mathematical domain violation (non-positive temperature, NaN input, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or unsupported configuration, detected before any work is done.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested plan cannot be realized (e.g. the problem is not stiff enough to project).
    #[error("infeasible plan: {0}")]
    Infeasible(String),

    /// A time step produced a non-finite value. `index` is the flat state index.
    #[error("step rejected at t={time}: non-finite value at state index {index}")]
    StepRejected { index: usize, time: f64 },

    /// A diagnostic precondition failed (e.g. quadrature too coarse for orthonormality).
    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    /// An iterative eigensolver failed to converge.
    #[error("eigensolver did not converge (residual norm {residual:e})")]
    NonConvergent { residual: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
