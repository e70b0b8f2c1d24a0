//! Crate-wide error type.

use crate::cg::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A graph failed structural validation; the report lists every violation.
    #[error("invalid computation graph: {0}")]
    InvalidGraph(ValidationReport),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported file version `{0}` (expected \"1\")")]
    Version(String),

    #[error("unknown operator label `{label}` for dialect {dialect}")]
    UnknownLabel { dialect: String, label: String },

    #[error("`zeroize` has no operator sequence; it must be removed during cell lowering")]
    ZeroizeExpansion,

    #[error("degenerate cell: no path from cell input to cell output")]
    DegenerateCell,

    #[error("mutation exhausted after {attempts} attempts")]
    MutationExhausted { attempts: usize },

    #[error("space exhausted: requested {requested} unique architectures, found {found}")]
    SpaceExhausted { requested: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver failed to converge for eigenvalue {index}")]
    EigenConvergence { index: usize },

    #[error("dimension mismatch in `{op}`: {details}")]
    Dim { op: &'static str, details: String },

    #[error("backward pass requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("gradient mismatch at `{parameter}`[{index}]: analytic {analytic}, finite-difference {numeric}")]
    GradientMismatch {
        parameter: String,
        index: usize,
        analytic: f64,
        numeric: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, details: impl Into<String>) -> Self {
        Error::Dim {
            op,
            details: details.into(),
        }
    }
}
