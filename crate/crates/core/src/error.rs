use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("no votes to aggregate")]
    NoVotes,

    #[error("insufficient regenerations: need {needed} at tau={tau}, found {found}")]
    InsufficientRegenerations { needed: usize, found: usize, tau: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown answer `{answer}` in equivalence edge for problem `{problem}`")]
    UnknownAnswer { problem: String, answer: String },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
