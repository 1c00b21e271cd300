use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice dimensions {lx}x{ly}: both must be even and at least 4")]
    Dimension { lx: usize, ly: usize },

    #[error("index {index} out of range for {what} (size {size})")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("Kirchhoff violation at node {node}: mismatch {mismatch:e}")]
    Kirchhoff { node: usize, mismatch: f64 },

    #[error("incomplete pair data: link pair ({0}, {1}) missing")]
    IncompleteData(usize, usize),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("truncation tail {tail:e} exceeds tolerance {tol:e}")]
    Truncation { tail: f64, tol: f64 },

    #[error("checkpoint integrity error: {0}")]
    Integrity(String),

    #[error("checkpoint was written for config {found}, current config is {expected}")]
    ConfigMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by the numerics rather than by the caller's configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Kirchhoff { .. } | Error::Fit(_) | Error::Truncation { .. }
        )
    }
}
