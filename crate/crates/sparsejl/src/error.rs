use thiserror::Error;

/// Crate-wide error type. `Domain` means the inputs lie outside the region
/// where a bound or representation exists; `Argument` means a plain misuse
/// of an operation contract.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("load error (line {line}): {msg}")]
    Load { line: usize, msg: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
