use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("proposal id {id} out of range for {n} proposals")]
    OutOfRange { id: usize, n: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("no feasible assignment: reviewer {reviewer} cannot be given a valid review set")]
    Infeasible { reviewer: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
