use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {bound:.3e}")]
    NotHermitian { defect: f64, bound: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("index set is empty")]
    EmptyIndexSet,

    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("index {index} out of range for index set of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("sections belong to different kernels")]
    KernelMismatch,

    #[error("kernel is not positive definite: minimum eigenvalue {min_eig:.6e}")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("factorization residual {residual:.3e} exceeds bound {bound:.3e}")]
    ResidualExceeded { residual: f64, bound: f64 },

    #[error("operator is not a contraction: spectral norm {norm:.12}")]
    NotContraction { norm: f64 },

    #[error("invalid window {window}: need at least {min}")]
    InvalidWindow { window: usize, min: usize },

    #[error("power identity fails already at n = 1: residual {residual:.3e}")]
    PowerIdentityFailed { residual: f64 },

    #[error("effect {atom:?} is not positive semidefinite: minimum eigenvalue {min_eig:.6e}")]
    EffectNotPsd { atom: String, min_eig: f64 },

    #[error("effects do not sum to the identity: defect {defect:.3e}")]
    Incomplete { defect: f64 },

    #[error("dilation check {what} failed: defect {defect:.3e}")]
    DilationDefect { what: &'static str, defect: f64 },

    #[error("unknown atom {0:?}")]
    UnknownAtom(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
