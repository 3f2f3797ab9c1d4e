use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A target sits on an antenna (or reference point): path amplitude diverges.
    #[error("singular geometry: {0}")]
    Singularity(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter value makes the model unidentifiable (e.g. zero reflection).
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("{context}: matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularMatrix { context: String, condition: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad data file: {0}")]
    Format(String),

    #[error("sweep aborted: {0}")]
    SweepAborted(String),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::DimensionMismatch(_) => 2,
            Error::Io(_) | Error::Format(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
