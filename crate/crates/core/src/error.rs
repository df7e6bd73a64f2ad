use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} is not a power of two")]
    NotQubitDimension(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateQubit(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("trace {0} is not 1")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("Kraus set violates completeness (max excess eigenvalue {0:e})")]
    KrausCompleteness(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dephasing spec has nonzero delta_sigma; use correlated_dephase")]
    NotCollective,

    #[error("expected {expected} channel photons, got {got}")]
    PhotonCount { expected: usize, got: usize },

    #[error("post-selection succeeded with zero probability")]
    ZeroProbability,

    #[error("truncation too small: {0}")]
    Truncation(String),

    #[error("unknown detector label {0}")]
    UnknownDetector(String),

    #[error("mode arity mismatch: {0}")]
    Arity(String),

    #[error("incomplete measurement record: {0}")]
    IncompleteRecords(String),

    #[error("zero total counts for {0}")]
    ZeroCounts(String),

    #[error("singular design matrix")]
    SingularDesign,

    #[error("fit did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
