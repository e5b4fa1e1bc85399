use thiserror::Error;

/// Errors raised by field, diffeomorphism, dynamics and solver operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible grids: {left} vs {right}")]
    IncompatibleGrid { left: String, right: String },

    #[error("degenerate map: minimum Jacobian determinant {min_jacobian:.6} at node {node}")]
    DegenerateMap { min_jacobian: f64, node: usize },

    #[error("inversion did not converge: last residual {residual:.3e} after {iterations} iterations")]
    InversionFailure { residual: f64, iterations: usize },

    #[error("blow-up at time index {time_index}: state exceeded {limit:e} or became non-finite")]
    BlowUp { time_index: usize, limit: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-parsable tag used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid-grid",
            Error::IncompatibleGrid { .. } => "incompatible-grid",
            Error::DegenerateMap { .. } => "degenerate-map",
            Error::InversionFailure { .. } => "inversion-failure",
            Error::BlowUp { .. } => "blow-up",
            Error::Validation(_) => "validation",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
