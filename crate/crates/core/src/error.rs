use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("root scan failed: {0}")]
    RootScan(String),

    #[error("eigensolver did not converge for a {0}x{0} matrix")]
    EigenSolver(usize),

    #[error("integration step size underflow at t = {t:.6e} (h = {h:.3e}); the problem looks stiff, loosen the tolerance relative to kappa_c2")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("density-matrix invariant violated at t = {t:.6e}: {what} = {value:.3e} (limit {limit:.1e})")]
    InvariantViolation {
        t: f64,
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error(
        "state is not confined to a single parity sector (populations {plus:.3e}, {minus:.3e})"
    )]
    MixedParity { plus: f64, minus: f64 },

    #[error("null space: {0}")]
    NullSpace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of numerical invariants rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenSolver(_)
                | Error::StepSizeUnderflow { .. }
                | Error::InvariantViolation { .. }
                | Error::NullSpace(_)
                | Error::RootScan(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
