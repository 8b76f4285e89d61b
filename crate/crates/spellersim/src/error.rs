//! Crate-wide error type.

use std::fmt;
use std::io;

#[derive(Debug)]
pub enum Error {
    /// An argument violated a documented precondition (bad dimensions,
    /// out-of-range parameter, infeasible constraint combination).
    InvalidInput(String),
    /// A Bayesian update could not be normalized (non-finite score or an
    /// all-zero weight vector).
    DegeneratePosterior,
    /// The adaptive quadrature did not reach the requested tolerance.
    Quadrature(String),
    /// A classifier score arrived while no flash was awaiting one.
    ScoreWithoutPending,
    /// A comparison report was requested without an rc-random sweep to
    /// compare against.
    MissingBaseline,
    /// A gain-curve cache file was malformed.
    CurveFormat(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DegeneratePosterior => {
                write!(f, "posterior update degenerated: normalizer is zero or not finite")
            }
            Error::Quadrature(msg) => write!(f, "quadrature failed: {msg}"),
            Error::ScoreWithoutPending => {
                write!(f, "classifier score arrived with an empty pending-flash queue")
            }
            Error::MissingBaseline => {
                write!(f, "comparison report requires an rc-random baseline sweep")
            }
            Error::CurveFormat(msg) => write!(f, "bad gain-curve file: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
