use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Stereographic coordinate requested at (or too close to) the south pole.
    #[error("stereographic projection is singular at the south pole (n_z = {n_z})")]
    PoleSingularity { n_z: f64 },

    /// A truncated series lost positivity, so its logarithm is undefined.
    #[error("domain error: {reason}")]
    Domain { reason: String },

    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn domain(reason: impl Into<String>) -> Self {
        Error::Domain {
            reason: reason.into(),
        }
    }

    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
