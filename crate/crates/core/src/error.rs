use thiserror::Error;

/// Errors raised by the numeric layer and the state constructors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("party count {n} outside supported range 1..={max}")]
    PartyCount { n: usize, max: usize },

    #[error("Pauli digit {digit} at position {position} is not in 0..=3")]
    DigitOutOfRange { digit: u8, position: usize },

    #[error("expected {expected} Pauli digits, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid Pauli character {ch:?} at position {position}")]
    InvalidPauliChar { ch: char, position: usize },

    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("state is not full rank (min eigenvalue {0:e})")]
    NotFullRank(f64),

    #[error("imaginary part {0:e} of a Pauli moment is not negligible")]
    ComplexMoment(f64),

    #[error("non-finite coefficient for {0}")]
    NonFinite(String),

    #[error("first argument has weight {0:e} outside the support of the second")]
    SupportViolation(f64),

    #[error("eigenvalue spread {0} exceeds the exponential overflow guard")]
    Overflow(f64),

    #[error("eigendecomposition failed to reach residual {0:e}")]
    EigenFailure(f64),

    #[error("invalid party subset: {0}")]
    InvalidParties(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("matrix is not diagonal (off-diagonal magnitude {0:e})")]
    NotDiagonal(f64),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("no convergence after {0} cycles")]
    NoConvergence(usize),

    #[error("not enough converged records to extrapolate level {0}")]
    InsufficientData(usize),

    #[error("state spec: {message} (at position {position})")]
    Spec { message: String, position: usize },

    #[error("state file: {0}")]
    StateFile(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
