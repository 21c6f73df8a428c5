use thiserror::Error;

/// Errors raised by the bound computations, solvers and config loading.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("injected delay {delay:e} s is not below the cyclic prefix ({cp:e} s)")]
    DelayExceedsCp { delay: f64, cp: f64 },

    #[error("perturbation norm {actual:e} deviates from the required {expected:e}")]
    BadPerturbationNorm { expected: f64, actual: f64 },

    #[error("distance must be positive")]
    ZeroDistance,

    #[error("point coincides with anchor {0}")]
    CoincidentPoint(usize),

    #[error("delay-domain curvature vanished (|A| = {0:e})")]
    DegenerateCurvature(f64),

    #[error("generalized Fisher matrix A is singular")]
    SingularA,

    #[error("anchor geometry is singular at the evaluation point")]
    SingularGeometry,

    #[error("backtracking line search made no progress after {0} halvings")]
    NoDescentProgress(usize),

    #[error("unknown anchor index {0}")]
    UnknownAnchor(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// `true` for errors caused by the input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Schema { .. }
                | Error::DelayExceedsCp { .. }
                | Error::BadPerturbationNorm { .. }
                | Error::ZeroDistance
                | Error::CoincidentPoint(_)
                | Error::UnknownAnchor(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
