use thiserror::Error;

/// Numerical and domain errors raised by the estimation primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The convex-combination scale `k` collapsed, so the two sets share no interior.
    #[error("ellipsoids are disjoint (convex-combination scale k = {k})")]
    DisjointSets { k: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

impl Error {
    /// Short machine-readable tag used by the CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "invalid_matrix",
            Error::Parameter(_) => "parameter",
            Error::DisjointSets { .. } => "disjoint_sets",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
