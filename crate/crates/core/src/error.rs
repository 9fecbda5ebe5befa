use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cost polynomial was compiled without third-order tables")]
    MissingThirdOrder,

    #[error("unsupported Trotter order {0} (expected 1, 2 or 4)")]
    UnsupportedOrder(u32),

    #[error("model is not translation invariant: {0}")]
    NotTranslationInvariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Json(_) | Error::UnsupportedOrder(_) => 2,
            Error::Capacity(_) => 3,
            Error::Numerical(_) => 4,
            _ => 1,
        }
    }
}
