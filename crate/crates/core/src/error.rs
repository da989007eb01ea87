use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core algorithms can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not conform.
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A documented precondition was violated.
    Contract(String),
    /// A loss, gradient or parameter became NaN or infinite.
    NonFinite(String),
    /// Noise generators need at least 4x4 pixels.
    UnsupportedSize { width: usize, height: usize },
    /// The stroke generator gave up before reaching its coverage target.
    CoverageNotReached {
        attempts: usize,
        coverage: f64,
        target: f64,
    },
    /// Training loss stayed far above its starting value.
    Diverged { epoch: usize, loss: f64, initial: f64 },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn non_finite(msg: impl Into<String>) -> Self {
        Error::NonFinite(msg.into())
    }

    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Diverged { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => write!(
                f,
                "{op}: shape mismatch between {}x{} and {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::UnsupportedSize { width, height } => {
                write!(f, "unsupported image size {width}x{height} (need at least 4x4)")
            }
            Error::CoverageNotReached {
                attempts,
                coverage,
                target,
            } => write!(
                f,
                "stroke coverage {coverage:.4} below target {target:.4} after {attempts} strokes"
            ),
            Error::Diverged { epoch, loss, initial } => write!(
                f,
                "training diverged at epoch {epoch}: loss {loss} vs initial {initial}"
            ),
        }
    }
}

impl core::error::Error for Error {}
