//! Error types shared across the crate.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampled input had too few entries or an inconsistent grid.
    #[error("size error: {0}")]
    Size(String),

    /// A quadrature or truncation target could not be met within budget.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// A linear solve failed, with the time-step index for context.
    #[error("solver error at step {step}: {detail}")]
    Solver { step: usize, detail: String },

    /// NaN/Inf or another numerical failure during a run.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Bad configuration file or scenario description.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: config problems are 2, numerical ones 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
