//! Crate-wide error type. Variants carry enough context to decide whether a
//! failure is a configuration problem (CLI exit 2) or a numerical one (exit 1).

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Invalid configuration, preset name, or argument combination.
    Config(String),
    /// A documented precondition of an operation was violated.
    Precondition(String),
    /// A non-finite value appeared while evaluating a model or a field.
    Eval(String),
    /// Newton/descent iteration failed to reach the requested tolerance.
    SolverStall { iterations: usize, residual: f64 },
    /// A field that must vanish on the boundary carries O(1) values there.
    BoundaryViolation { trace: f64, scale: f64 },
    /// An operation needs a nonempty non-degenerate set (e.g. |grad u| > 0).
    DegenerateField(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Eval(msg) => write!(f, "evaluation error: {msg}"),
            Error::SolverStall {
                iterations,
                residual,
            } => write!(
                f,
                "solver stalled after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::BoundaryViolation { trace, scale } => write!(
                f,
                "nonzero boundary trace {trace:.3e} (field scale {scale:.3e})"
            ),
            Error::DegenerateField(msg) => write!(f, "degenerate field: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
