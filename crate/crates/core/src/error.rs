use thiserror::Error;

/// Failures raised while parsing or evaluating an expression map.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("arity mismatch for {what}: expected {expected}, found {found}")]
    Arity {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("domain error: {function} undefined at {value}")]
    Domain { function: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("no invertible {required}x{required} pivot block")]
    NoPivot { required: usize },
    #[error("invalid shape: {0}")]
    Shape(String),
}

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("level set is not a submersion at {point:?} (rank {rank} < codim {codim})")]
    NotSubmersion {
        point: Vec<f64>,
        rank: usize,
        codim: usize,
    },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("invalid regime: {0}")]
    InvalidRegime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
