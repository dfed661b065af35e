use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Tensor shapes are inconsistent with the operation's contract.
    Shape(String),
    /// A non-finite value was produced or supplied; the message names the
    /// first offending position.
    Numeric(String),
    /// Invalid configuration values (out-of-range sizes, bad flags).
    Config(String),
    /// An operation over a pixel mask found the mask empty.
    EmptyMask,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Shape(m) => write!(f, "shape error: {m}"),
            CoreError::Numeric(m) => write!(f, "numeric error: {m}"),
            CoreError::Config(m) => write!(f, "config error: {m}"),
            CoreError::EmptyMask => write!(f, "empty mask: no valid pixels"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
