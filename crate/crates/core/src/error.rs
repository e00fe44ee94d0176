use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("unstable model: lambda = {lambda} must be below mu1 + mu2 = {capacity}")]
    Unstable { lambda: f64, capacity: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {point} lies outside the open disk of radius {radius}")]
    PointOutsideDisk { point: String, radius: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("contour mismatch: {0}")]
    RadiusMismatch(String),

    #[error("evaluation failed at grid pair ({m1}, {m2}): {reason}")]
    Evaluation { m1: usize, m2: usize, reason: String },

    #[error("truncation did not converge: {0}")]
    TruncationFailure(String),

    #[error("linear solve failed at s = {s}: {reason}")]
    Solver { s: String, reason: String },

    #[error("Laplace inversion failed at s = {s}: {source}")]
    Inversion {
        s: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    /// Name of the module that raised the error, used in CLI diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) | Error::Unstable { .. } => "qlen",
            Error::InvalidGrid(_)
            | Error::PointOutsideDisk { .. }
            | Error::ShapeMismatch { .. }
            | Error::Evaluation { .. } => "contour_ops",
            Error::RadiusMismatch(_) => "decondition",
            Error::TruncationFailure(_) => "oracle",
            Error::Solver { .. } => "rt_solver",
            Error::Inversion { .. } => "talbot",
            Error::Unsupported(_) => "methods",
        }
    }
}
