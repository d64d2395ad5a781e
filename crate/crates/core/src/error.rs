use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the numerical core can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A softmax row had no admissible entry, or every compared row had zero norm.
    Degenerate(String),
    /// A numeric argument is outside its admissible range.
    Parameter(String),
    /// Inconsistent configuration (e.g. all loss weights zero, no metapaths).
    Config(String),
    /// The graph violates a structural invariant.
    Validation(String),
    /// Evaluation protocol cannot be satisfied by the data.
    Protocol(String),
    /// Input data is empty or unusable.
    Data(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize, detail: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Protocol(msg) => write!(f, "protocol error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Divergence { epoch, detail } => {
                write!(f, "training diverged at epoch {epoch}: {detail}")
            }
        }
    }
}

impl core::error::Error for Error {}
