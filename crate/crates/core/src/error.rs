use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
///
/// Each variant belongs to one of four families (config, numerical,
/// validation, structural); [`Error::exit_code`] maps those onto the CLI
/// contract.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e} > tol {tol:.1e})")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("singular expression: {symbol} vanishes")]
    Singularity { symbol: String },

    #[error("logical basis ill-defined: {0}")]
    BasisIllDefined(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("validation failure: {0}")]
    Validation(String),

    #[error("undefined phase: diagonal entry for |{0}> vanishes")]
    UndefinedPhase(String),

    #[error("calibration failure: {0}")]
    CalibrationFailure(String),

    #[error("circuit structure: {0}")]
    Structural(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn singular(symbol: impl Into<String>) -> Self {
        Error::Singularity {
            symbol: symbol.into(),
        }
    }

    /// Process exit code: 1 config, 2 numerical failure, 3 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            Error::NumericalFailure(_)
            | Error::CalibrationFailure(_)
            | Error::Singularity { .. } => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
