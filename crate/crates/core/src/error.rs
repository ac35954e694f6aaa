use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("internal convergence failure: {0}")]
    Convergence(String),
    #[error("numerical blow-up at time node {node} (t = {time})")]
    BlowUp { node: usize, time: f64 },
    #[error("uncontrollable configuration: {0}")]
    Uncontrollable(String),
    #[error("unknown name: {0}")]
    Unknown(String),
}

pub type Result<T> = std::result::Result<T, Error>;
