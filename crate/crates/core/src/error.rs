use thiserror::Error;

/// Errors produced by problem construction, the SVD oracle and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments violate a documented precondition (dimensions, ranges, flags).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A row with zero Euclidean norm was passed where the iteration
    /// requires a_i != 0.
    #[error("row {0} has zero norm")]
    ZeroRow(usize),

    /// The matrix has numerical rank zero.
    #[error("matrix is degenerate (numerical rank 0)")]
    DegenerateMatrix,

    /// A row is orthogonal to the row space, so its restricted
    /// pseudoinverse does not exist.
    #[error("row is orthogonal to the row space")]
    DegenerateRow,

    /// A problem file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
