use thiserror::Error;

pub type Result<T> = std::result::Result<T, TempusError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TempusError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("basis is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("Hamiltonian eigenvalue {value} at index {index} is not an integer")]
    NonIntegerSpectrum { index: usize, value: f64 },

    #[error("Hamiltonian eigenvalue {value} at index {index} is negative")]
    NegativeEnergy { index: usize, value: f64 },

    #[error("degenerate spectrum is not supported here (level {level} repeats)")]
    DegenerateSpectrum { level: i64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("coherent state truncation too small: tail mass {tail_mass:.3e} beyond cutoff {cutoff}")]
    CutoffTooSmall { cutoff: usize, tail_mass: f64 },

    #[error("POVM effects do not sum to identity (residual {residual:.3e})")]
    IncompletePovm { residual: f64 },

    #[error("POVM effect {index} is not positive (min eigenvalue {min_eigenvalue:.3e})")]
    NonPositiveEffect { index: usize, min_eigenvalue: f64 },

    #[error("Kraus operator {index} violates the energy grading (residual {residual:.3e})")]
    GradingViolation { index: usize, residual: f64 },

    #[error("channel is not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("normalization |c_n|^2 + |d_(n-1)|^2 = 1 fails at n = {index} (value {value:.6})")]
    KrausNormalization { index: usize, value: f64 },

    #[error("perfect preparation is contradictory: {0}")]
    PreparationContradiction(String),

    #[error("clock is trivial (Fisher information {fisher:.3e}); quantity undefined")]
    TrivialClock { fisher: f64 },

    #[error("state is not stationary under the joint evolution (residual {residual:.3e})")]
    NotStationary { residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wavefunction has mass {mass:.3e} near the origin; splitting is singular there")]
    SingularSplit { mass: f64 },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
