use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Input outside the domain of an operation.
    Domain(&'static str),
    /// Arguments from incompatible grids or dimensions.
    Mismatch(&'static str),
    /// A resolution or parameter below the supported minimum.
    Resolution(&'static str),
    /// A hypothesis of the operation does not hold; carries the offending value.
    Hypothesis(&'static str, f64),
    /// Non-finite intermediate value.
    Overflow(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Mismatch(m) => write!(f, "mismatch: {m}"),
            Error::Resolution(m) => write!(f, "resolution error: {m}"),
            Error::Hypothesis(m, v) => write!(f, "hypothesis violated: {m} (value {v:e})"),
            Error::Overflow(m) => write!(f, "overflow: {m}"),
        }
    }
}

impl core::error::Error for Error {}
