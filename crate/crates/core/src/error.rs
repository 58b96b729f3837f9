use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    InvalidInput { field: String, message: String },

    #[error("shift {shift} is numerically an eigenvalue of A (rcond {rcond:.3e})")]
    SingularShift { shift: Complex64, rcond: f64 },

    #[error("eigenvalues {a} and {b} are not separated (repeated poles)")]
    RepeatedPoles { a: Complex64, b: Complex64 },

    #[error("system is not stable: eigenvalue {eigenvalue} has nonnegative real part")]
    UnstableSystem { eigenvalue: Complex64 },

    #[error("matrix is not stable: eigenvalue {eigenvalue} has nonnegative real part")]
    UnstableMatrix { eigenvalue: Complex64 },

    #[error("system is not state-space symmetric ({0})")]
    NotSss(String),

    #[error("projection basis has numerical rank {rank} < {expected}")]
    RankDeficientBasis { rank: usize, expected: usize },

    #[error("W^T V is numerically singular (rcond {rcond:.3e})")]
    SingularGramian { rcond: f64 },

    #[error("Lyapunov residual {residual:.3e} exceeds bound {bound:.3e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("full pole {full} collides with reduced pole {reduced}")]
    PoleCollision { full: Complex64, reduced: Complex64 },

    #[error("IRKA did not converge in {sweeps} sweeps (last change {last_change:.3e})")]
    NotConverged { sweeps: usize, last_change: f64 },

    #[error("mirrored shift {shift} lies outside the open right half-plane")]
    MirroredShiftInvalid { shift: Complex64 },

    #[error("reduced model is not a fixed point: optimality residual {residual:.3e}")]
    NotAFixedPoint { residual: f64 },

    #[error("reduced model is not ZIP: {0}")]
    NonZipReduced(String),

    #[error("error system is numerically zero (H2 error {norm:.3e})")]
    DegenerateError { norm: f64 },

    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            message: message.into(),
        }
    }
}
