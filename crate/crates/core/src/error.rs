use thiserror::Error;

pub type Result<T, E = SpcaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SpcaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty support: no coordinate passes the threshold")]
    EmptySupport,

    #[error("zero direction: the linear step over the sphere is undefined")]
    ZeroDirection,

    #[error("objective decreased from {before} to {after}; the objective is not convex")]
    NotConvex { before: f64, after: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl SpcaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SpcaError::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        SpcaError::DimensionMismatch(msg.into())
    }

    /// Process exit code for the command-line front end: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            SpcaError::InvalidArgument(_) | SpcaError::DimensionMismatch(_) => 1,
            SpcaError::NonFinite { .. }
            | SpcaError::DegenerateData(_)
            | SpcaError::Parse { .. }
            | SpcaError::Io(_)
            | SpcaError::Serialize(_) => 2,
            SpcaError::EmptySupport | SpcaError::ZeroDirection | SpcaError::NotConvex { .. } => 3,
        }
    }
}
