use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no optical feedback (mirror reflectivity is zero)")]
    NoFeedback,

    #[error("incompatible options: {0}")]
    IncompatibleOptions(String),

    #[error("no crossover in bracket [{lo:e}, {hi:e}]")]
    NoCrossover { lo: f64, hi: f64 },

    #[error("root finding did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("array shape mismatch: expected {expected} points, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("wavenumber {0:e} 1/m is not on the grid")]
    NotOnGrid(f64),

    #[error("time step {dt:e} s exceeds the stability bound {bound:e} s")]
    TimeStep { dt: f64, bound: f64 },

    #[error("invariant violated at step {step} (t = {time:e} s): {detail}")]
    InvariantViolation { step: usize, time: f64, detail: String },

    #[error("growth fit rejected: {0}")]
    Fit(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("malformed snapshot: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
