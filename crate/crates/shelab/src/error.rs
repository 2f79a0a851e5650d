use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite integrand value at x = {x}")]
    NonFinite { x: f64 },
    #[error("matrix is not antisymmetric: |A + A^T| = {defect:e}")]
    NotAntisymmetric { defect: f64 },
    #[error("matrix dimension {0} is not even")]
    OddDimension(usize),
    #[error("sign continuation ambiguous at path index {index}; refine the path")]
    RefinePath { index: usize },
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("numeric failure in {stage}: {detail}")]
    Numeric { stage: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            stage,
            detail: detail.into(),
        }
    }

    /// True for errors caused by user-supplied input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Range { .. }
                | Error::Domain(_)
                | Error::Config(_)
                | Error::OddDimension(_)
                | Error::NotAntisymmetric { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
