use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigendecomposition did not converge (off-diagonal residual {residual:.3e})")]
    EigenNoConvergence { residual: f64 },

    #[error("empty span: every input matrix is zero or linearly dependent")]
    EmptySpan,

    #[error("vector is not on the unit sphere (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("matrix {index} has trace {trace:.3e}; a traceless system is required")]
    NonzeroTrace { index: usize, trace: f64 },

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("relaxation indeterminate after {sweeps} sweeps (final gap {gap:.3e})")]
    Indeterminate { sweeps: usize, gap: f64 },

    #[error("trivial face: the relaxation solution has numerical rank 0")]
    TrivialFace,

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },
}
