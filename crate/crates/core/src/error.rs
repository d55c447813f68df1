use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was called on inputs that violate its stated precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    /// The numerical divergence test could not decide either way.
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A field coefficient became non-finite during time stepping.
    #[error("overflow at t = {time}: {detail}")]
    Overflow { time: f64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml encode: {0}")]
    TomlEncode(#[from] toml::ser::Error),

    #[error("toml decode: {0}")]
    TomlDecode(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
